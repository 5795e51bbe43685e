use serde::{Deserialize, Serialize};

use super::{Atom, Distribution, MeasureError, Uniform};

const KNOT_SNAP: f64 = 1e-12;

/// `c0 + c1 x + c2 x²` in the global variable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadPiece {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl QuadPiece {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        QuadPiece { c0, c1, c2 }
    }

    /// The line through `(x0, y0)` with slope `s`.
    pub fn line_through(x0: f64, y0: f64, s: f64) -> Self {
        QuadPiece::new(y0 - s * x0, s, 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x
    }

    pub fn sub(&self, o: &QuadPiece) -> QuadPiece {
        QuadPiece::new(self.c0 - o.c0, self.c1 - o.c1, self.c2 - o.c2)
    }

    /// Points of `[a, b]` where the extremes of the piece can occur.
    fn candidates(&self, a: f64, b: f64) -> impl Iterator<Item = f64> {
        let vertex = (self.c2 != 0.0)
            .then(|| -self.c1 / (2.0 * self.c2))
            .filter(|v| *v > a && *v < b);
        [a, b].into_iter().chain(vertex)
    }

    /// `(min value, argmin)` on `[a, b]`.
    pub fn min_on(&self, a: f64, b: f64) -> (f64, f64) {
        self.candidates(a, b)
            .map(|x| (self.eval(x), x))
            .fold((f64::INFINITY, a), |best, c| if c.0 < best.0 { c } else { best })
    }

    pub fn max_abs_on(&self, a: f64, b: f64) -> (f64, f64) {
        self.candidates(a, b)
            .map(|x| (self.eval(x).abs(), x))
            .fold((0.0, a), |best, c| if c.0 > best.0 { c } else { best })
    }

    /// Roots strictly inside `(a, b)`, sorted.
    pub fn roots_inside(&self, a: f64, b: f64) -> Vec<f64> {
        let scale = self.c0.abs().max(self.c1.abs()).max(self.c2.abs());
        if scale == 0.0 {
            return Vec::new();
        }
        let mut roots = Vec::new();
        if self.c2.abs() <= 1e-14 * scale {
            if self.c1 != 0.0 {
                roots.push(-self.c0 / self.c1);
            }
        } else {
            let disc = self.c1 * self.c1 - 4.0 * self.c2 * self.c0;
            if disc >= 0.0 {
                // numerically stable pair
                let sign = if self.c1 >= 0.0 { 1.0 } else { -1.0 };
                let q = -0.5 * (self.c1 + sign * disc.sqrt());
                if q != 0.0 {
                    roots.push(q / self.c2);
                    roots.push(self.c0 / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
        roots.retain(|r| *r > a && *r < b);
        roots.sort_by(f64::total_cmp);
        roots.dedup();
        roots
    }
}

/// A function on `[0, 1]` given by one quadratic per cell of a knot vector.
/// Adjacent pieces need not agree at shared knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseQuadratic {
    knots: Vec<f64>,
    pieces: Vec<QuadPiece>,
}

impl PiecewiseQuadratic {
    pub fn new(knots: Vec<f64>, pieces: Vec<QuadPiece>) -> Self {
        assert!(knots.len() == pieces.len() + 1 && !pieces.is_empty(), "knot/piece count mismatch");
        debug_assert!(knots.windows(2).all(|w| w[0] <= w[1]));
        PiecewiseQuadratic { knots, pieces }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[QuadPiece] {
        &self.pieces
    }

    /// `(left, right, piece)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, &QuadPiece)> {
        self.knots.windows(2).zip(&self.pieces).map(|(w, p)| (w[0], w[1], p))
    }

    fn piece_index(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(self.pieces.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Right derivative (left derivative at the last knot).
    pub fn deriv_right(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].deriv(x)
    }

    pub fn deriv_left(&self, x: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k < x);
        self.pieces[i.saturating_sub(1).min(self.pieces.len() - 1)].deriv(x)
    }

    /// Both functions re-expressed over the union of their knots.
    pub fn align<'a>(&'a self, other: &'a PiecewiseQuadratic) -> Vec<(f64, f64, QuadPiece, QuadPiece)> {
        let mut knots: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                (w[0], w[1], self.pieces[self.piece_index(mid)], other.pieces[other.piece_index(mid)])
            })
            .collect()
    }

    /// Pointwise max (`take_max`) or min of two functions, split at crossings.
    pub fn pointwise(&self, other: &PiecewiseQuadratic, take_max: bool) -> PiecewiseQuadratic {
        let mut knots = Vec::new();
        let mut pieces = Vec::new();
        for (a, b, p, q) in self.align(other) {
            let mut cuts = vec![a];
            // a crossing that rounds onto a knot would leave a sliver with the wrong piece
            cuts.extend(p.sub(&q).roots_inside(a, b).into_iter().filter(|r| r - a > KNOT_SNAP && b - r > KNOT_SNAP));
            cuts.push(b);
            for w in cuts.windows(2) {
                if w[1] - w[0] <= KNOT_SNAP && !pieces.is_empty() {
                    continue;
                }
                let mid = 0.5 * (w[0] + w[1]);
                let p_wins = (p.eval(mid) >= q.eval(mid)) == take_max;
                knots.push(w[0]);
                pieces.push(if p_wins { p } else { q });
            }
        }
        knots.push(*self.knots.last().unwrap());
        PiecewiseQuadratic::new(knots, pieces)
    }

    /// `sup |self − other|` over the common domain.
    pub fn sup_distance(&self, other: &PiecewiseQuadratic) -> f64 {
        self.align(other)
            .into_iter()
            .map(|(a, b, p, q)| p.sub(&q).max_abs_on(a, b).0)
            .fold(0.0, f64::max)
    }

    /// `(min of self − other, argmin)`; knots, cell vertices and endpoints are
    /// all inspected so this is exact up to rounding.
    pub fn min_difference(&self, other: &PiecewiseQuadratic) -> (f64, f64) {
        self.align(other)
            .into_iter()
            .map(|(a, b, p, q)| p.sub(&q).min_on(a, b))
            .fold((f64::INFINITY, 0.0), |best, c| if c.0 < best.0 { c } else { best })
    }
}

/// The integrated CDF `C_F(x) = ∫₀ˣ F`, exact on every piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedCdf {
    f: PiecewiseQuadratic,
}

impl IntegratedCdf {
    pub fn of(dist: &Distribution) -> IntegratedCdf {
        let mut knots: Vec<f64> = vec![0.0, 1.0];
        knots.extend(dist.atoms().iter().map(|a| a.x));
        for u in dist.uniforms() {
            knots.push(u.from);
            knots.push(u.to);
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        if knots.len() == 1 {
            knots.push(1.0);
        }
        let pieces = knots
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0], w[1]);
                let mut q = QuadPiece::default();
                for a in dist.atoms().iter().filter(|a| a.x <= lo) {
                    q.c0 -= a.w * a.x;
                    q.c1 += a.w;
                }
                for u in dist.uniforms() {
                    if u.to <= lo {
                        q.c0 -= u.w * 0.5 * (u.from + u.to);
                        q.c1 += u.w;
                    } else if u.from <= lo && u.to >= hi {
                        let k = u.w / (2.0 * (u.to - u.from));
                        q.c0 += k * u.from * u.from;
                        q.c1 -= 2.0 * k * u.from;
                        q.c2 += k;
                    }
                }
                q
            })
            .collect();
        IntegratedCdf {
            f: PiecewiseQuadratic::new(knots, pieces),
        }
    }

    /// Wraps a function assumed to be a valid integrated CDF.
    pub fn from_piecewise(f: PiecewiseQuadratic) -> IntegratedCdf {
        IntegratedCdf { f }
    }

    pub fn as_piecewise(&self) -> &PiecewiseQuadratic {
        &self.f
    }

    pub fn knots(&self) -> &[f64] {
        self.f.knots()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.f.eval(x.min(1.0)) + (x - 1.0).max(0.0)
    }

    /// `F(x)`, the right derivative.
    pub fn cdf(&self, x: f64) -> f64 {
        if x >= 1.0 {
            return 1.0;
        }
        self.f.deriv_right(x.max(0.0))
    }

    pub fn sup_distance(&self, other: &IntegratedCdf) -> f64 {
        self.f.sup_distance(&other.f)
    }

    /// Recovers the distribution from the right derivative: slope jumps become
    /// atoms and curvature becomes uniform density.
    pub fn to_distribution(&self) -> Result<Distribution, MeasureError> {
        const NEG: f64 = -1e-9;
        let knots = self.f.knots();
        let pieces = self.f.pieces();
        let mut atoms = Vec::new();
        let mut uniforms: Vec<Uniform> = Vec::new();
        let mut push_atom = |x: f64, w: f64| -> Result<(), MeasureError> {
            if w < NEG {
                return Err(MeasureError::Invalid(format!("negative mass {w} at {x}")));
            }
            if w > 1e-14 {
                atoms.push(Atom { x, w });
            }
            Ok(())
        };
        push_atom(knots[0], pieces[0].deriv(knots[0]))?;
        for i in 1..pieces.len() {
            let x = knots[i];
            push_atom(x, pieces[i].deriv(x) - pieces[i - 1].deriv(x))?;
        }
        let last = knots[knots.len() - 1];
        push_atom(last, 1.0 - pieces[pieces.len() - 1].deriv(last))?;
        for (lo, hi, p) in self.f.cells() {
            let density = 2.0 * p.c2;
            if density < NEG {
                return Err(MeasureError::Invalid(format!("negative density on [{lo}, {hi}]")));
            }
            if density <= 1e-12 || hi <= lo {
                continue;
            }
            let w = density * (hi - lo);
            match uniforms.last_mut() {
                Some(prev)
                    if prev.to == lo
                        && (prev.w / (prev.to - prev.from) - density).abs() <= 1e-12 * density =>
                {
                    prev.to = hi;
                    prev.w += w;
                }
                _ => uniforms.push(Uniform { from: lo, to: hi, w }),
            }
        }
        Distribution::normalized(atoms, uniforms, 1e-8)
    }
}

/// Result of comparing two distributions in the informativeness order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Order {
    /// `C_F ≤ C_G` everywhere with equal endpoints.
    Less,
    /// The inequality fails at `x` by `excess`.
    NotLess { x: f64, excess: f64 },
}

impl Order {
    pub fn holds(&self) -> bool {
        matches!(self, Order::Less)
    }
}

/// Is `f` a mean-preserving contraction of `g`, i.e. `C_F ≤ C_G` with
/// `C_F(1) = C_G(1)`, all within `tol`?
pub fn less_informative(f: &Distribution, g: &Distribution, tol: f64) -> Order {
    less_informative_cdf(&f.integrated_cdf(), &g.integrated_cdf(), tol)
}

pub(crate) fn less_informative_cdf(cf: &IntegratedCdf, cg: &IntegratedCdf, tol: f64) -> Order {
    let end = cf.eval(1.0) - cg.eval(1.0);
    if end.abs() > tol {
        return Order::NotLess { x: 1.0, excess: end.abs() };
    }
    let (d, x) = cg.f.min_difference(&cf.f);
    if d < -tol {
        Order::NotLess { x, excess: -d }
    } else {
        Order::Less
    }
}
