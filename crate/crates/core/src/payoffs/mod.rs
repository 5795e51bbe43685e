//! Piecewise-polynomial interim payoffs `u(m)` on `[0, 1]`.
//!
//! Each segment carries a curvature tag. Values at breakpoints are the larger
//! one-sided limit, so every payoff is upper semi-continuous by construction.

mod crater;
mod envelope;
mod olc;

pub use crater::{
    check_crater, check_crater_with, crater_patterns, tangent_crossing, CraterReason, CraterVerdict, CraterWitness,
};
pub use envelope::{
    concave_envelope, restricted_convex_envelope, ConcaveEnvelope, ConvexMinorant, EnvPiece, PointSet,
};
pub use olc::{is_ordinally_less_convex, verify_witness, ChordWitness, FnPayoff, OlcVerdict, ScalarFn, DEFAULT_OLC_GRID};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{Distribution, GridSpec};
use crate::poly::Poly;

/// Tolerance for value and derivative matching at breakpoints.
pub const REGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PayoffError {
    #[error("m = {0} is outside [0, 1]")]
    Domain(f64),
    #[error("invalid payoff: {0}")]
    Invalid(String),
    #[error("payoff is not regular: {0}")]
    NotRegular(Irregularity),
    #[error("empty point set")]
    EmptySet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Affine,
    #[serde(alias = "strictly-convex")]
    Convex,
    #[serde(alias = "strictly-concave")]
    Concave,
    #[default]
    Unclassified,
}

impl Curvature {
    pub fn is_concave(self) -> bool {
        matches!(self, Curvature::Concave | Curvature::Affine)
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Convex | Curvature::Affine)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub coeffs: Poly,
    #[serde(default)]
    pub curvature: Curvature,
}

impl Segment {
    pub fn new(from: f64, to: f64, coeffs: Poly, curvature: Curvature) -> Self {
        Segment { from, to, coeffs, curvature }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrregularityKind {
    Discontinuity,
    DerivativeDiscontinuity,
    Unclassified,
    CurvatureMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Irregularity {
    pub kind: IrregularityKind,
    pub at: f64,
}

impl std::fmt::Display for Irregularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} at {}", self.kind, self.at)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawPayoff {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPayoff", into = "RawPayoff")]
pub struct Payoff {
    segments: Vec<Segment>,
}

impl TryFrom<RawPayoff> for Payoff {
    type Error = PayoffError;
    fn try_from(raw: RawPayoff) -> Result<Self, Self::Error> {
        Payoff::new(raw.segments)
    }
}

impl From<Payoff> for RawPayoff {
    fn from(p: Payoff) -> Self {
        RawPayoff { segments: p.segments }
    }
}

/// A maximal run of segments sharing a curvature class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub from: f64,
    pub to: f64,
    pub curvature: Curvature,
}

impl Payoff {
    /// Segments must be sorted, non-degenerate and tile `[0, 1]`.
    pub fn new(mut segments: Vec<Segment>) -> Result<Self, PayoffError> {
        if segments.is_empty() {
            return Err(PayoffError::Invalid("no segments".into()));
        }
        segments.sort_by(|a, b| a.from.total_cmp(&b.from));
        for s in &segments {
            let finite = s.from.is_finite() && s.to.is_finite() && s.coeffs.coeffs().iter().all(|c| c.is_finite());
            if !finite || s.to <= s.from {
                return Err(PayoffError::Invalid(format!("bad segment [{}, {}]", s.from, s.to)));
            }
        }
        if segments[0].from != 0.0 || segments[segments.len() - 1].to != 1.0 {
            return Err(PayoffError::Invalid("segments must cover [0, 1]".into()));
        }
        for i in 1..segments.len() {
            let gap = segments[i].from - segments[i - 1].to;
            if gap.abs() > 1e-12 {
                return Err(PayoffError::Invalid(format!("gap or overlap at {}", segments[i].from)));
            }
            segments[i].from = segments[i - 1].to;
        }
        Ok(Payoff { segments })
    }

    /// A single polynomial on `[0, 1]`.
    pub fn polynomial(coeffs: Vec<f64>, curvature: Curvature) -> Self {
        Payoff {
            segments: vec![Segment::new(0.0, 1.0, Poly::new(coeffs), curvature)],
        }
    }

    /// Single polynomial with curvature tags inferred from its second derivative.
    pub fn inferred(coeffs: Vec<f64>) -> Self {
        Payoff::polynomial(coeffs, Curvature::Unclassified).with_inferred_curvature()
    }

    /// `1{m ≥ at}`.
    pub fn step(at: f64) -> Self {
        Payoff::new(vec![
            Segment::new(0.0, at, Poly::zero(), Curvature::Affine),
            Segment::new(at, 1.0, Poly::constant(1.0), Curvature::Affine),
        ])
        .expect("valid step")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Interior breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.from).collect()
    }

    /// Interior breakpoints where the value or the derivative jumps.
    pub fn rough_points(&self) -> Vec<f64> {
        self.segments
            .windows(2)
            .filter(|w| {
                let b = w[1].from;
                let (l, r) = (&w[0].coeffs, &w[1].coeffs);
                let scale = 1.0 + l.eval(b).abs().max(r.eval(b).abs());
                let dscale = 1.0 + l.derivative().eval(b).abs();
                (l.eval(b) - r.eval(b)).abs() > REGULAR_TOL * scale
                    || (l.derivative().eval(b) - r.derivative().eval(b)).abs() > 1e-8 * dscale
            })
            .map(|w| w[1].from)
            .collect()
    }

    fn segment_index(&self, m: f64) -> usize {
        let i = self.segments.partition_point(|s| s.from <= m);
        i.saturating_sub(1).min(self.segments.len() - 1)
    }

    /// `u(m)`; at a breakpoint, the larger one-sided limit.
    pub fn eval(&self, m: f64) -> Result<f64, PayoffError> {
        if !(0.0..=1.0).contains(&m) {
            return Err(PayoffError::Domain(m));
        }
        Ok(self.value(m))
    }

    /// Like [`Payoff::eval`] with `m` clamped to `[0, 1]`.
    pub fn value(&self, m: f64) -> f64 {
        let m = m.clamp(0.0, 1.0);
        let i = self.segment_index(m);
        let here = self.segments[i].coeffs.eval(m);
        if i > 0 && (m - self.segments[i].from).abs() <= 1e-12 {
            here.max(self.segments[i - 1].coeffs.eval(m))
        } else {
            here
        }
    }

    /// Right derivative (left derivative at 1).
    pub fn deriv(&self, m: f64) -> Result<f64, PayoffError> {
        if !(0.0..=1.0).contains(&m) {
            return Err(PayoffError::Domain(m));
        }
        Ok(self.slope(m))
    }

    pub fn slope(&self, m: f64) -> f64 {
        let m = m.clamp(0.0, 1.0);
        self.segments[self.segment_index(m)].coeffs.derivative().eval(m)
    }

    pub fn second_derivative(&self, m: f64) -> f64 {
        let m = m.clamp(0.0, 1.0);
        self.segments[self.segment_index(m)].coeffs.derivative().derivative().eval(m)
    }

    /// Validates continuity, derivative continuity and the curvature tags.
    pub fn check_regular(&self) -> Result<(), Irregularity> {
        for w in self.segments.windows(2) {
            let b = w[1].from;
            let (l, r) = (&w[0].coeffs, &w[1].coeffs);
            let scale = 1.0 + l.eval(b).abs();
            if (l.eval(b) - r.eval(b)).abs() > REGULAR_TOL * scale {
                return Err(Irregularity { kind: IrregularityKind::Discontinuity, at: b });
            }
            let (dl, dr) = (l.derivative().eval(b), r.derivative().eval(b));
            if (dl - dr).abs() > REGULAR_TOL * (1.0 + dl.abs()) {
                return Err(Irregularity { kind: IrregularityKind::DerivativeDiscontinuity, at: b });
            }
        }
        for s in &self.segments {
            let at = 0.5 * (s.from + s.to);
            match s.curvature {
                Curvature::Unclassified => {
                    return Err(Irregularity { kind: IrregularityKind::Unclassified, at });
                }
                tag if !curvature_consistent(&s.coeffs, s.from, s.to, tag) => {
                    return Err(Irregularity { kind: IrregularityKind::CurvatureMismatch, at });
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn is_regular(&self) -> bool {
        self.check_regular().is_ok()
    }

    pub(crate) fn require_regular(&self) -> Result<(), PayoffError> {
        self.check_regular().map_err(PayoffError::NotRegular)
    }

    /// Splits each segment at sign changes of its second derivative and tags
    /// the pieces accordingly. Zero-curvature polynomials become affine.
    pub fn with_inferred_curvature(&self) -> Payoff {
        let mut out = Vec::new();
        for s in &self.segments {
            let d2 = s.coeffs.derivative().derivative();
            if d2.max_abs_coeff() <= 1e-14 * (1.0 + s.coeffs.max_abs_coeff()) {
                out.push(Segment::new(s.from, s.to, s.coeffs.clone(), Curvature::Affine));
                continue;
            }
            let mut cuts = vec![s.from];
            cuts.extend(d2.roots_in(s.from, s.to).into_iter().filter(|r| *r > s.from + 1e-12 && *r < s.to - 1e-12));
            cuts.push(s.to);
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let tag = if d2.eval(mid) > 0.0 { Curvature::Convex } else { Curvature::Concave };
                match out.last_mut() {
                    Some(last) if last.curvature == tag && last.coeffs == s.coeffs && last.to == w[0] => {
                        last.to = w[1];
                    }
                    _ => out.push(Segment::new(w[0], w[1], s.coeffs.clone(), tag)),
                }
            }
        }
        Payoff { segments: out }
    }

    /// Cubic Hermite interpolant of `f` with derivative `df` at the given
    /// knots (which must include 0 and 1), with inferred curvature tags.
    pub fn hermite_fit(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, knots: &[f64]) -> Result<Payoff, PayoffError> {
        let mut ks = knots.to_vec();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        let mut segs = Vec::with_capacity(ks.len());
        for w in ks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = b - a;
            let (fa, fb, da, db) = (f(a), f(b), df(a), df(b));
            // local t = m − a
            let c2 = (3.0 * (fb - fa) / h - 2.0 * da - db) / h;
            let c3 = (da + db - 2.0 * (fb - fa) / h) / (h * h);
            segs.push(Segment::new(a, b, Poly::from_local(&[fa, da, c2, c3], a), Curvature::Unclassified));
        }
        Ok(Payoff::new(segs)?.with_inferred_curvature())
    }

    /// Piecewise-linear interpolant of `f` at the given knots (which must
    /// include 0 and 1). Not regular in general: it has kinks at the knots.
    pub fn linear_interpolant(f: impl Fn(f64) -> f64, knots: &[f64]) -> Result<Payoff, PayoffError> {
        let mut ks = knots.to_vec();
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        let segs = ks
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let s = (f(b) - f(a)) / (b - a);
                Segment::new(a, b, Poly::linear(f(a) - s * a, s), Curvature::Affine)
            })
            .collect();
        Payoff::new(segs)
    }

    /// Maximal runs of segments, classed as convex (strict), or concave
    /// (concave or affine). Used for the crater and S-shape patterns.
    pub fn regions(&self) -> Vec<Region> {
        let mut out: Vec<Region> = Vec::new();
        for s in &self.segments {
            let class = if s.curvature == Curvature::Convex { Curvature::Convex } else { Curvature::Concave };
            match out.last_mut() {
                Some(last) if last.curvature == class => last.to = s.to,
                _ => out.push(Region { from: s.from, to: s.to, curvature: class }),
            }
        }
        out
    }

    /// Maximal intervals on which the tags say concave (affine included).
    pub fn concavity_intervals(&self) -> Vec<(f64, f64)> {
        self.runs(Curvature::is_concave)
    }

    /// Maximal intervals on which the tags say convex (affine included).
    pub fn convexity_intervals(&self) -> Vec<(f64, f64)> {
        self.runs(Curvature::is_convex)
    }

    fn runs(&self, keep: impl Fn(Curvature) -> bool) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for s in self.segments.iter().filter(|s| keep(s.curvature)) {
            match out.last_mut() {
                Some(last) if last.1 == s.from => last.1 = s.to,
                _ => out.push((s.from, s.to)),
            }
        }
        out
    }

    /// Strictly convex on `[0, x]` and concave on `[x, 1]` for some interior `x`.
    pub fn is_s_shaped(&self) -> Result<bool, PayoffError> {
        self.require_regular()?;
        let r = self.regions();
        Ok(r.len() == 2 && r[0].curvature == Curvature::Convex)
    }

    /// The tangent line at `x` as a degree-one polynomial.
    pub fn tangent(&self, x: f64) -> Result<Poly, PayoffError> {
        self.require_regular()?;
        let (ux, dx) = (self.eval(x)?, self.deriv(x)?);
        Ok(Poly::linear(ux - dx * x, dx))
    }

    /// `∫ u dF`, exact for every atom and uniform part.
    pub fn expectation(&self, f: &Distribution) -> f64 {
        f.expect_with(|x| self.value(x), |a, b| self.integral(a, b))
    }

    /// `∫_a^b u`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.segments
            .iter()
            .filter_map(|s| {
                let (lo, hi) = (s.from.max(a), s.to.min(b));
                (hi > lo).then(|| s.coeffs.integrate(lo, hi))
            })
            .sum()
    }

    pub fn grid_values(&self, grid: &GridSpec) -> Vec<f64> {
        grid.points().iter().map(|&x| self.value(x)).collect()
    }

    /// `max over [a, b] of u(m) − line(m)` and a maximiser, exact per segment.
    pub fn max_above(&self, a: f64, b: f64, line: &Poly) -> (f64, f64) {
        let mut best = (f64::NEG_INFINITY, a);
        for s in &self.segments {
            let (lo, hi) = (s.from.max(a), s.to.min(b));
            if hi < lo {
                continue;
            }
            let cand = s.coeffs.sub(line).max_on(lo, hi);
            if cand.0 > best.0 {
                best = cand;
            }
        }
        best
    }

    /// `sup |u|`.
    pub fn sup_norm(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let (mx, _) = s.coeffs.max_on(s.from, s.to);
                let (mn, _) = s.coeffs.min_on(s.from, s.to);
                mx.abs().max(mn.abs())
            })
            .fold(0.0, f64::max)
    }

    /// `α·u + β`, keeping tags (flipped for negative α).
    pub fn affine_transform(&self, alpha: f64, beta: f64) -> Payoff {
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let tag = match (s.curvature, alpha < 0.0) {
                    (Curvature::Convex, true) => Curvature::Concave,
                    (Curvature::Concave, true) => Curvature::Convex,
                    (t, _) => t,
                };
                Segment::new(s.from, s.to, s.coeffs.scale(alpha).add(&Poly::constant(beta)), tag)
            })
            .collect();
        Payoff { segments }
    }

    /// Adds a polynomial everywhere and re-infers the tags.
    pub fn plus(&self, p: &Poly) -> Payoff {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment::new(s.from, s.to, s.coeffs.add(p), Curvature::Unclassified))
            .collect();
        Payoff { segments }.with_inferred_curvature()
    }

    /// `φ ∘ u` for a polynomial `φ`, with re-inferred tags.
    pub fn composed_with(&self, phi: &Poly) -> Payoff {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment::new(s.from, s.to, phi.compose(&s.coeffs), Curvature::Unclassified))
            .collect();
        Payoff { segments }.with_inferred_curvature()
    }
}

fn curvature_consistent(p: &Poly, a: f64, b: f64, tag: Curvature) -> bool {
    let d2 = p.derivative().derivative();
    let tol = 1e-9 * (1.0 + p.max_abs_coeff());
    let (hi, _) = d2.max_on(a, b);
    let (lo, _) = d2.min_on(a, b);
    match tag {
        Curvature::Affine => hi.abs() <= tol && lo.abs() <= tol,
        Curvature::Convex => lo >= -tol && hi > tol,
        Curvature::Concave => hi <= tol && lo < -tol,
        Curvature::Unclassified => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kink() -> Payoff {
        Payoff::new(vec![
            Segment::new(0.0, 0.5, Poly::linear(0.0, 1.0), Curvature::Affine),
            Segment::new(0.5, 1.0, Poly::linear(1.0, -1.0), Curvature::Affine),
        ])
        .unwrap()
    }

    #[test]
    fn eval_and_deriv_conventions() {
        let sq = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        assert_eq!(sq.eval(0.5).unwrap(), 0.25);
        assert!(matches!(sq.eval(1.5), Err(PayoffError::Domain(_))));
        assert_eq!(Payoff::step(0.5).eval(0.5).unwrap(), 1.0);
        assert_eq!(Payoff::step(0.5).eval(0.4999).unwrap(), 0.0);
        assert_eq!(kink().deriv(0.5).unwrap(), -1.0);
        assert_eq!(kink().deriv(1.0).unwrap(), -1.0);
        assert_eq!(kink().deriv(0.0).unwrap(), 1.0);
    }

    #[test]
    fn regularity() {
        let s = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        assert!(s.check_regular().is_ok());
        assert_eq!(s.segments().len(), 2);
        assert!((s.segments()[0].to - 0.5).abs() < 1e-12);
        assert_eq!(
            Payoff::step(0.5).check_regular().unwrap_err().kind,
            IrregularityKind::Discontinuity
        );
        let k = kink().check_regular().unwrap_err();
        assert_eq!(k.kind, IrregularityKind::DerivativeDiscontinuity);
        assert_eq!(k.at, 0.5);
        let untagged = Payoff::polynomial(vec![0.0, 1.0], Curvature::Unclassified);
        assert_eq!(untagged.check_regular().unwrap_err().kind, IrregularityKind::Unclassified);
        let lying = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Concave);
        assert_eq!(lying.check_regular().unwrap_err().kind, IrregularityKind::CurvatureMismatch);
    }

    #[test]
    fn shapes_and_tangents() {
        assert!(Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]).is_s_shaped().unwrap());
        assert!(!Payoff::inferred(vec![0.0, 0.0, 1.0]).is_s_shaped().unwrap());
        let t = Payoff::inferred(vec![0.0, 0.0, 1.0]).tangent(0.5).unwrap();
        assert_eq!(t.coeffs(), &[-0.25, 1.0]);
    }

    #[test]
    fn expectation_is_exact() {
        let u = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let f = Distribution::uniform(0.0, 1.0).unwrap();
        assert!((u.expectation(&f) - 0.5).abs() < 1e-15);
        let g = Distribution::binary(0.0, 1.0, 0.5).unwrap();
        assert!((u.expectation(&g) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hermite_fit_reproduces_cubics() {
        let p = Poly::new(vec![0.1, -0.3, 0.8, -0.4]);
        let dp = p.derivative();
        let fit = Payoff::hermite_fit(|m| p.eval(m), |m| dp.eval(m), &[0.0, 0.3, 1.0]).unwrap();
        for i in 0..=20 {
            let m = i as f64 / 20.0;
            assert!((fit.value(m) - p.eval(m)).abs() < 1e-13);
        }
        assert!(fit.is_regular());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"segments":[{"from":0.0,"to":0.5,"coeffs":[0.0,0.0,3.0,-2.0],"curvature":"convex"},{"from":0.5,"to":1.0,"coeffs":[0.0,0.0,3.0,-2.0],"curvature":"concave"}]}"#;
        let u: Payoff = serde_json::from_str(text).unwrap();
        assert!(u.is_regular());
        assert_eq!(serde_json::to_string(&u).unwrap(), text);
        let defaulted: Payoff =
            serde_json::from_str(r#"{"segments":[{"from":0.0,"to":1.0,"coeffs":[0.0,1.0]}]}"#).unwrap();
        assert_eq!(defaulted.segments()[0].curvature, Curvature::Unclassified);
        assert!(serde_json::from_str::<Payoff>(r#"{"segments":[{"from":0.0,"to":0.6,"coeffs":[1.0]}]}"#).is_err());
    }
}
