use super::cdf::{PiecewiseQuadratic, QuadPiece};

#[derive(Debug, Clone, Copy)]
struct Part {
    q: QuadPiece,
    lo: f64,
    hi: f64,
}

impl Part {
    /// `(min over the part of q(x) − s·x, argmin)`.
    fn support(&self, s: f64) -> (f64, f64) {
        let shifted = QuadPiece::new(self.q.c0, self.q.c1 - s, self.q.c2);
        let x = if self.q.c2 > 0.0 {
            ((s - self.q.c1) / (2.0 * self.q.c2)).clamp(self.lo, self.hi)
        } else if shifted.eval(self.lo) <= shifted.eval(self.hi) {
            self.lo
        } else {
            self.hi
        };
        (shifted.eval(x), x)
    }
}

#[derive(Debug, Clone, Copy)]
struct Held {
    part: Part,
    full_hi: f64,
    /// slope of the bridge arriving at `part.lo`, if any
    s_in: Option<f64>,
}

/// Common lower supporting line of `a` (left) and `b` (right):
/// `(slope, contact on a, contact on b)`.
fn bitangent(a: &Part, b: &Part) -> (f64, f64, f64) {
    let diff = |s: f64| a.support(s).0 - b.support(s).0;
    let (mut lo, mut hi) = (-1.0, 1.0);
    for _ in 0..200 {
        if diff(lo) <= 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if diff(hi) >= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if diff(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    (s, a.support(s).1, b.support(s).1)
}

/// Greatest convex minorant of a piecewise quadratic function on its domain.
///
/// Each cell is treated as a closed piece, so at a discontinuity the lower of
/// the two one-sided values is what the envelope sees. Concave cells only
/// contribute their endpoints.
pub fn convex_envelope(f: &PiecewiseQuadratic) -> PiecewiseQuadratic {
    let mut parts = Vec::new();
    for (lo, hi, q) in f.cells() {
        if q.c2 >= 0.0 {
            parts.push(Part { q: *q, lo, hi });
        } else {
            parts.push(Part { q: *q, lo, hi: lo });
            parts.push(Part { q: *q, lo: hi, hi });
        }
    }

    let mut stack: Vec<Held> = Vec::with_capacity(parts.len());
    for mut b in parts {
        let mut s_in = None;
        while let Some(top) = stack.last_mut() {
            let a = Part { hi: top.full_hi, ..top.part };
            let (s, xa, xb) = bitangent(&a, &b);
            if xa <= a.lo && top.s_in.is_some_and(|prev| s < prev) {
                stack.pop();
                continue;
            }
            top.part.hi = xa;
            b.lo = xb;
            s_in = Some(s);
            break;
        }
        stack.push(Held { part: b, full_hi: b.hi, s_in });
    }

    let mut knots = Vec::new();
    let mut pieces = Vec::new();
    for (i, held) in stack.iter().enumerate() {
        let p = held.part;
        if i > 0 {
            let prev = stack[i - 1].part;
            let (x0, y0) = (prev.hi, prev.q.eval(prev.hi));
            let (x1, y1) = (p.lo, p.q.eval(p.lo));
            if x1 > x0 {
                knots.push(x0);
                pieces.push(QuadPiece::line_through(x0, y0, (y1 - y0) / (x1 - x0)));
            }
        }
        if p.hi > p.lo {
            knots.push(p.lo);
            pieces.push(p.q);
        }
    }
    let first = stack.first().expect("nonempty domain").part;
    let last = stack.last().unwrap().part;
    if pieces.is_empty() {
        knots.push(first.lo);
        pieces.push(first.q);
    }
    knots.push(last.hi);
    PiecewiseQuadratic::new(knots, pieces)
}
