use serde::{Deserialize, Serialize};

use super::{Payoff, PayoffError};
use crate::poly::Poly;

/// Gap below which `cav u` and `u` are considered in contact.
pub const CONTACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvPiece {
    /// `cav u = u` on `[from, to]`.
    Curve { from: f64, to: f64 },
    /// `cav u` is the chord between the two end values.
    Line { from: f64, to: f64, y_from: f64, y_to: f64 },
}

impl EnvPiece {
    pub fn from(&self) -> f64 {
        match *self {
            EnvPiece::Curve { from, .. } | EnvPiece::Line { from, .. } => from,
        }
    }

    pub fn to(&self) -> f64 {
        match *self {
            EnvPiece::Curve { to, .. } | EnvPiece::Line { to, .. } => to,
        }
    }

    fn slope(&self) -> Option<f64> {
        match *self {
            EnvPiece::Line { from, to, y_from, y_to } => Some((y_to - y_from) / (to - from)),
            EnvPiece::Curve { .. } => None,
        }
    }

    fn line(&self) -> Option<Poly> {
        match *self {
            EnvPiece::Line { from, y_from, .. } => {
                let s = self.slope().unwrap();
                Some(Poly::linear(y_from - s * from, s))
            }
            EnvPiece::Curve { .. } => None,
        }
    }
}

/// The concave envelope `cav u` with its contact set `{cav u = u}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcaveEnvelope {
    pieces: Vec<EnvPiece>,
    contact: Vec<(f64, f64)>,
    #[serde(skip)]
    payoff: Option<Payoff>,
}

impl ConcaveEnvelope {
    pub fn pieces(&self) -> &[EnvPiece] {
        &self.pieces
    }

    /// Closed intervals (possibly degenerate) where `cav u − u ≤ 1e-9`.
    pub fn contact_set(&self) -> &[(f64, f64)] {
        &self.contact
    }

    pub fn eval(&self, m: f64) -> f64 {
        let m = m.clamp(0.0, 1.0);
        let i = self.pieces.partition_point(|p| p.from() <= m).saturating_sub(1);
        match self.pieces[i] {
            EnvPiece::Curve { .. } => self.payoff.as_ref().expect("envelope built from a payoff").value(m),
            EnvPiece::Line { from, to, y_from, y_to } => y_from + (y_to - y_from) * (m - from) / (to - from),
        }
    }

    /// The maximal interval on which `cav u` is affine and which contains `m`
    /// in its interior; `[m, m]` in curved regions and at kinks.
    pub fn affine_interval(&self, m: f64) -> (f64, f64) {
        const EDGE: f64 = 1e-12;
        self.pieces
            .iter()
            .find(|p| matches!(p, EnvPiece::Line { .. }) && p.from() + EDGE < m && m < p.to() - EDGE)
            .map_or((m, m), |p| (p.from(), p.to()))
    }

    /// Is `m` in the contact set?
    pub fn touches(&self, m: f64) -> bool {
        self.contact.iter().any(|&(a, b)| m >= a - 1e-12 && m <= b + 1e-12)
    }
}

struct Sample {
    x: f64,
    y: f64,
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    // minimises f on [a, b]
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if b - a <= 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [a, b, mid].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

/// Bisects `g` to a root near `guess` when it changes sign on either side.
fn polish(g: impl Fn(f64) -> f64, lo: f64, hi: f64, guess: f64) -> f64 {
    let g0 = g(guess);
    if g0 == 0.0 {
        return guess;
    }
    for (a, b) in [(lo, guess), (guess, hi)] {
        if b > a && g(a).signum() * g(b).signum() <= 0.0 {
            return crate::poly::bisect(&g, a, b, g(a));
        }
    }
    guess
}

/// Concave envelope by an upper hull over dense per-segment samples,
/// followed by golden-section refinement of every tangency point.
/// `refinement` is the sample density per unit length.
pub fn concave_envelope(u: &Payoff, refinement: usize) -> ConcaveEnvelope {
    let density = refinement.max(16) as f64;
    let mut samples: Vec<Sample> = Vec::new();
    for s in u.segments() {
        let n = ((s.to - s.from) * density).ceil().max(8.0) as usize;
        for k in 0..=n {
            let x = if k == n { s.to } else { s.from + (s.to - s.from) * k as f64 / n as f64 };
            samples.push(Sample { x, y: u.value(x) });
        }
    }
    samples.sort_by(|a, b| a.x.total_cmp(&b.x));
    samples.dedup_by(|a, b| a.x == b.x);

    // upper hull, keeping sample indices
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..samples.len() {
        while hull.len() >= 2 {
            let (a, b) = (&samples[hull[hull.len() - 2]], &samples[hull[hull.len() - 1]]);
            let p = &samples[i];
            if (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }

    let breaks: Vec<f64> = u.breakpoints();
    let is_smooth_interior =
        |x: f64| x > 0.0 && x < 1.0 && breaks.iter().all(|b| (b - x).abs() > 1e-12);
    let scale = 1.0 + samples.iter().fold(0.0_f64, |m, s| m.max(s.y.abs()));

    // classify hull edges
    let mut pieces: Vec<EnvPiece> = Vec::new();
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (a, b) = (&samples[i], &samples[j]);
        let mid = 0.5 * (a.x + b.x);
        let chord = 0.5 * (a.y + b.y);
        let curve = j == i + 1 && is_smooth_interior(mid) && u.value(mid) > chord + 1e-15 * scale;
        let piece = if curve {
            EnvPiece::Curve { from: a.x, to: b.x }
        } else {
            EnvPiece::Line { from: a.x, to: b.x, y_from: a.y, y_to: b.y }
        };
        push_merged(&mut pieces, piece);
    }

    // refine the ends of every line that sit at smooth interior points
    let neighbours = |x: f64| -> (f64, f64) {
        let k = samples.partition_point(|s| s.x < x);
        let lo = samples[k.saturating_sub(1)].x;
        let hi = samples[(k + 1).min(samples.len() - 1)].x;
        // stay inside the segment holding x
        let seg = u.segments().iter().find(|s| s.from <= x && x <= s.to).unwrap();
        (lo.max(seg.from), hi.min(seg.to))
    };
    for idx in 0..pieces.len() {
        let EnvPiece::Line { mut from, mut to, .. } = pieces[idx] else { continue };
        let left_free = is_smooth_interior(from);
        let right_free = is_smooth_interior(to);
        if !left_free && !right_free {
            continue;
        }
        let (llo, lhi) = neighbours(from);
        let (rlo, rhi) = neighbours(to);
        for _ in 0..8 {
            if left_free {
                let (b, yb) = (to, u.value(to));
                let hi = lhi.min(b - 1e-12);
                from = golden(|x| (yb - u.value(x)) / (b - x), llo, hi);
                // polish: the tangent at `from` passes through (b, yb)
                let g = |x: f64| yb - u.value(x) - u.slope(x) * (b - x);
                from = polish(g, llo, hi, from);
            }
            if right_free {
                let (a, ya) = (from, u.value(from));
                let lo = rlo.max(a + 1e-12);
                to = golden(|x| -(u.value(x) - ya) / (x - a), lo, rhi);
                let g = |x: f64| u.value(x) - ya - u.slope(x) * (x - a);
                to = polish(g, lo, rhi, to);
            }
        }
        pieces[idx] = EnvPiece::Line { from, to, y_from: u.value(from), y_to: u.value(to) };
        if idx > 0 {
            set_to(&mut pieces[idx - 1], from);
        }
        if idx + 1 < pieces.len() {
            set_from(&mut pieces[idx + 1], to);
        }
    }
    pieces.retain(|p| p.to() > p.from());
    let mut merged: Vec<EnvPiece> = Vec::new();
    for p in pieces {
        push_merged(&mut merged, p);
    }
    let mut env = ConcaveEnvelope { pieces: merged, contact: Vec::new(), payoff: Some(u.clone()) };
    env.contact = contact_set(u, &env);
    env
}

fn set_to(p: &mut EnvPiece, x: f64) {
    match p {
        EnvPiece::Curve { to, .. } | EnvPiece::Line { to, .. } => *to = x,
    }
}

fn set_from(p: &mut EnvPiece, x: f64) {
    match p {
        EnvPiece::Curve { from, .. } | EnvPiece::Line { from, .. } => *from = x,
    }
}

fn push_merged(pieces: &mut Vec<EnvPiece>, p: EnvPiece) {
    if let Some(last) = pieces.last_mut() {
        match (*last, p) {
            (EnvPiece::Curve { from, .. }, EnvPiece::Curve { to, .. }) => {
                *last = EnvPiece::Curve { from, to };
                return;
            }
            (EnvPiece::Line { from, y_from, .. }, EnvPiece::Line { to, y_to, .. }) => {
                let (s1, s2) = (last.slope().unwrap(), p.slope().unwrap());
                if (s1 - s2).abs() <= 1e-9 * (1.0 + s1.abs()) {
                    *last = EnvPiece::Line { from, to, y_from, y_to };
                    return;
                }
            }
            _ => {}
        }
    }
    pieces.push(p);
}

fn contact_set(u: &Payoff, env: &ConcaveEnvelope) -> Vec<(f64, f64)> {
    let mut parts: Vec<(f64, f64)> = Vec::new();
    for p in env.pieces() {
        let Some(line) = p.line() else {
            parts.push((p.from(), p.to()));
            continue;
        };
        for s in u.segments() {
            let (lo, hi) = (s.from.max(p.from()), s.to.min(p.to()));
            if hi < lo {
                continue;
            }
            let d = line.sub(&s.coeffs);
            let (dmax, _) = d.max_on(lo, hi);
            let (dmin, _) = d.min_on(lo, hi);
            if dmax.abs() <= CONTACT_TOL && dmin.abs() <= CONTACT_TOL {
                parts.push((lo, hi));
                continue;
            }
            let mut cands: Vec<f64> = d.derivative().roots_in(lo, hi);
            cands.push(lo);
            cands.push(hi);
            for x in cands {
                // at breakpoints the payoff takes the larger one-sided value
                if line.eval(x) - u.value(x) <= CONTACT_TOL {
                    parts.push((x, x));
                }
            }
        }
    }
    parts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in parts {
        match out.last_mut() {
            Some(last) if a <= last.1 + 1e-12 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// A subset of `[0, 1]` given as finitely many points and closed intervals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
}

impl PointSet {
    pub fn points(points: Vec<f64>) -> Self {
        PointSet { points, intervals: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.intervals.is_empty()
    }
}

/// Greatest convex minorant of `u` restricted to a set, as a piecewise-linear
/// function on the hull of the set; `+∞` outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexMinorant {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl ConvexMinorant {
    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return f64::INFINITY;
        }
        if self.xs.len() == 1 {
            return self.ys[0];
        }
        let k = self.xs.partition_point(|&p| p <= x).clamp(1, self.xs.len() - 1);
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Largest `u − Φ` over `[a, b]` where `Φ` is finite, with its location.
    /// Exact: each edge is compared with each payoff segment in closed form.
    pub fn max_shortfall(&self, u: &Payoff, a: f64, b: f64) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, a);
        if self.xs.len() == 1 {
            let x = self.xs[0];
            if x >= a && x <= b {
                best = (u.value(x) - self.ys[0], x);
            }
            return best;
        }
        for k in 1..self.xs.len() {
            let (x0, x1) = (self.xs[k - 1].max(a), self.xs[k].min(b));
            if x1 < x0 {
                continue;
            }
            let s = (self.ys[k] - self.ys[k - 1]) / (self.xs[k] - self.xs[k - 1]);
            let line = Poly::linear(self.ys[k - 1] - s * self.xs[k - 1], s);
            let cand = u.max_above(x0, x1, &line);
            // breakpoint values are the larger one-sided limit
            let cand = [x0, x1]
                .into_iter()
                .map(|x| (u.value(x) - line.eval(x), x))
                .fold(cand, |best, c| if c.0 > best.0 { c } else { best });
            if cand.0 > best.0 {
                best = cand;
            }
        }
        best
    }
}

/// `Φ^u_X`: the lower convex hull of `u` on `X`. Intervals in `X` are sampled
/// at `density` points per unit length plus every payoff breakpoint.
pub fn restricted_convex_envelope(u: &Payoff, set: &PointSet, density: usize) -> Result<ConvexMinorant, PayoffError> {
    if set.is_empty() {
        return Err(PayoffError::EmptySet);
    }
    let mut xs: Vec<f64> = set.points.clone();
    let breaks = u.breakpoints();
    for &(a, b) in &set.intervals {
        let n = ((b - a) * density as f64).ceil().max(1.0) as usize;
        xs.extend((0..=n).map(|k| a + (b - a) * k as f64 / n as f64));
        xs.extend(breaks.iter().copied().filter(|x| *x > a && *x < b));
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, u.value(x))).collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(ConvexMinorant {
        xs: hull.iter().map(|p| p.0).collect(),
        ys: hull.iter().map(|p| p.1).collect(),
    })
}
