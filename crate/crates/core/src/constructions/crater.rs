use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::measures::{Atom, Distribution, GridSpec, Uniform};
use crate::payoffs::{
    check_crater, crater_patterns, is_ordinally_less_convex, tangent_crossing, Curvature, Payoff, Segment,
    DEFAULT_OLC_GRID,
};
use crate::poly::Poly;
use crate::solver::{upper_censorship_solve, OptimalFace, RootStatus};

/// Candidate tangent points per side.
const SEARCH: usize = 200;
const CONTACT_TOL: f64 = 1e-10;
const MEAN_TOL: f64 = 1e-12;
/// Required separation of `C_F(X)` from `C_F0(X)`.
pub const LEMMA5_TOL: f64 = 1e-6;
/// Tangent pairs for which the whole construction is tried.
const CASE1_CANDIDATES: usize = 400;
const KAPPA_CAP: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CraterCase {
    /// neither concave side is affine; `p` is the max of two tangents
    Case1,
    /// one concave side is affine; `p` is a tangent followed by `u`
    Case2,
}

/// `left` on `[0, kink]` and `right` on `[kink, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkedLine {
    pub left: Poly,
    pub right: Poly,
    pub kink: f64,
}

impl KinkedLine {
    pub fn eval(&self, m: f64) -> f64 {
        if m <= self.kink {
            self.left.eval(m)
        } else {
            self.right.eval(m)
        }
    }

    pub fn slopes(&self) -> (f64, f64) {
        (self.left.derivative().eval(0.0), self.right.derivative().eval(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraterChecks {
    /// `max (u − p)` over `[x′, w′]`
    pub majorization: f64,
    /// `max |p − u|` over `{x, w}`
    pub contact: f64,
    pub mean_error: f64,
    pub left_mean_error: f64,
    pub right_mean_error: f64,
    /// `C_F0(X)` and `C_F(X)`
    pub c_prior: f64,
    pub c_optimizer: f64,
    pub olc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraterCounterexample {
    pub case: CraterCase,
    /// built on `m ↦ u(1 − m)` and reflected back
    pub mirrored: bool,
    pub u: Payoff,
    pub x_prime: f64,
    pub x: f64,
    #[serde(rename = "X")]
    pub cross_x: f64,
    #[serde(rename = "Y")]
    pub cross_y: f64,
    pub w: f64,
    pub w_prime: f64,
    pub y: f64,
    pub z: f64,
    pub p: KinkedLine,
    pub prior: Distribution,
    pub v: Payoff,
    pub optimizer: Distribution,
    /// states pooled by the optimizer and where they go
    pub pooled: (f64, f64),
    pub pooled_at: f64,
    pub kappa: Option<f64>,
    pub checks: CraterChecks,
}

fn failure(stage: &str, detail: impl Into<String>) -> ConstructionError {
    ConstructionError::Failure { stage: stage.into(), detail: detail.into() }
}

fn curvature_at(u: &Payoff, m: f64) -> Curvature {
    let segs = u.segments();
    let i = segs.partition_point(|s| s.to <= m).min(segs.len() - 1);
    segs[i].curvature
}

fn all_affine(u: &Payoff, a: f64, b: f64) -> bool {
    u.segments()
        .iter()
        .filter(|s| s.to > a && s.from < b)
        .all(|s| s.curvature == Curvature::Affine)
}

/// Interior points of `(a, b)` lying in strictly concave segments.
fn concave_points(u: &Payoff, a: f64, b: f64) -> Vec<f64> {
    (1..SEARCH)
        .map(|k| a + (b - a) * k as f64 / SEARCH as f64)
        .filter(|&m| curvature_at(u, m) == Curvature::Concave)
        .collect()
}

fn reflect_poly(p: &Poly) -> Poly {
    p.compose(&Poly::linear(1.0, -1.0))
}

fn reflect_payoff(u: &Payoff) -> Result<Payoff, ConstructionError> {
    let segs = u
        .segments()
        .iter()
        .rev()
        .map(|s| Segment::new(1.0 - s.to, 1.0 - s.from, reflect_poly(&s.coeffs), s.curvature))
        .collect();
    Ok(Payoff::new(segs)?)
}

fn reflect_dist(d: &Distribution) -> Result<Distribution, ConstructionError> {
    let atoms = d.atoms().iter().map(|a| Atom { x: 1.0 - a.x, w: a.w }).collect();
    let uniforms = d.uniforms().iter().map(|u| Uniform { from: 1.0 - u.to, to: 1.0 - u.from, w: u.w }).collect();
    Ok(Distribution::new(atoms, uniforms)?)
}

/// Atomless law on `[x′, w′]` with mean `X` and conditional means `x` below
/// and `w` above `X`: two uniforms on each side.
pub fn two_sided_prior(x_prime: f64, x: f64, cross: f64, w: f64, w_prime: f64) -> Result<Distribution, ConstructionError> {
    if !(x_prime < x && x < cross && cross < w && w < w_prime) {
        return Err(failure("prior", format!("points not increasing: {x_prime}, {x}, {cross}, {w}, {w_prime}")));
    }
    let side = (w - cross) / (w - x);
    let lam = (cross - x) / (cross - x_prime);
    let lam_r = (w_prime - w) / (w_prime - cross);
    let u = |from, to, w| Uniform { from, to, w };
    Ok(Distribution::new(
        vec![],
        vec![
            u(x_prime, x, side * lam),
            u(x, cross, side * (1.0 - lam)),
            u(cross, w, (1.0 - side) * lam_r),
            u(w, w_prime, (1.0 - side) * (1.0 - lam_r)),
        ],
    )?)
}

/// Everything except the checks, in the working orientation.
struct Built {
    case: CraterCase,
    x_prime: f64,
    x: f64,
    cross: (f64, f64),
    w: f64,
    w_prime: f64,
    y: f64,
    z: f64,
    p: KinkedLine,
    prior: Distribution,
    v: Payoff,
    optimizer: Distribution,
    pooled: (f64, f64),
    pooled_at: f64,
    kappa: Option<f64>,
}

/// `u(X) + u′(X)(m − X) + κ(X − m)²` with `κ` doubled until it majorises
/// `u` on `[0, X]`.
fn convex_extension(u: &Payoff, cross: f64) -> Result<(Poly, f64), ConstructionError> {
    let (ux, dx) = (u.value(cross), u.slope(cross));
    let scale = 1.0 + u.sup_norm();
    let mut kappa = 1.0;
    while kappa <= KAPPA_CAP {
        let q = Poly::from_local(&[ux, dx, kappa], cross);
        let coarse = (0..=1000)
            .map(|k| cross * k as f64 / 1000.0)
            .all(|m| u.value(m) <= q.eval(m) + 1e-12 * scale);
        if coarse && u.max_above(0.0, cross, &q).0 <= 1e-12 * scale {
            return Ok((q, kappa));
        }
        kappa *= 2.0;
    }
    Err(failure("v", format!("no majorising quadratic below kappa = {KAPPA_CAP}")))
}

fn case1_with(u: &Payoff, (xb, y, z, wb): (f64, f64, f64, f64), x: f64, w: f64) -> Result<Built, ConstructionError> {
    let (cx, cy) = tangent_crossing(u, x, w).ok_or_else(|| failure("tangents", "equal slopes"))?;
    let p = KinkedLine { left: u.tangent(x)?, right: u.tangent(w)?, kink: cx };
    let prior = two_sided_prior(xb, x, cx, w, wb)?;

    let (q, kappa) = convex_extension(u, cx)?;
    let mut segs = Vec::new();
    if cx > 0.0 {
        segs.push(Segment::new(0.0, cx, q, Curvature::Convex));
    }
    for s in u.segments().iter().filter(|s| s.to > cx) {
        segs.push(Segment::new(s.from.max(cx), s.to, s.coeffs.clone(), s.curvature));
    }
    let v = Payoff::new(segs)?;

    let cens = upper_censorship_solve(&v, &prior)?;
    if cens.status != RootStatus::Bracketed || cens.a >= cx {
        return Err(failure("censorship", format!("cutoff {} ({:?}) is not below X = {cx}", cens.a, cens.status)));
    }
    Ok(Built {
        case: CraterCase::Case1,
        x_prime: xb,
        x,
        cross: (cx, cy),
        w,
        w_prime: wb,
        y,
        z,
        p,
        prior,
        v,
        optimizer: cens.distribution,
        pooled: (cens.a, wb),
        pooled_at: cens.b,
        kappa: Some(kappa),
    })
}

fn c_gap(b: &Built) -> f64 {
    let cx = b.cross.0;
    b.prior.integrated_cdf().eval(cx) - b.optimizer.integrated_cdf().eval(cx)
}

/// Among tangent pairs crossing above `u` inside `[y, z]`, keeps the one
/// whose optimizer lowers `C(X)` the most.
fn build_case1(u: &Payoff, pattern: (f64, f64, f64, f64)) -> Result<Built, ConstructionError> {
    let (xb, y, z, wb) = pattern;
    let ws = concave_points(u, z, wb);
    let mut pairs = Vec::new();
    for x in concave_points(u, xb, y) {
        let dx = u.slope(x);
        for &w in &ws {
            if dx >= u.slope(w) {
                continue;
            }
            let Some((cx, cy)) = tangent_crossing(u, x, w) else { continue };
            if cx >= y && cx <= z && cy > u.value(cx) {
                pairs.push((x, w));
            }
        }
    }
    if pairs.is_empty() {
        return Err(failure("tangents", "no tangent pair crosses above u inside [y, z]"));
    }
    let stride = pairs.len().div_ceil(CASE1_CANDIDATES);
    let mut last = None;
    let mut best: Option<(f64, Built)> = None;
    for &(x, w) in pairs.iter().step_by(stride) {
        match case1_with(u, pattern, x, w) {
            Ok(b) => {
                let g = c_gap(&b);
                if best.as_ref().is_none_or(|(bg, _)| g > *bg) {
                    best = Some((g, b));
                }
            }
            Err(e) => last = Some(e),
        }
    }
    best.map(|(_, b)| b).ok_or_else(|| last.expect("at least one candidate"))
}

/// The right concave side `[z, w′]` is affine.
fn build_case2(u: &Payoff, (xb, y, z, wb): (f64, f64, f64, f64)) -> Result<Built, ConstructionError> {
    let line = u.tangent(0.5 * (z + wb))?;
    let s = line.derivative().eval(0.0);
    let mut best: Option<(f64, f64, f64)> = None;
    for x in concave_points(u, xb, y) {
        let t = u.tangent(x)?;
        let dx = t.derivative().eval(0.0);
        if dx >= s {
            continue;
        }
        let cx = (line.eval(0.0) - t.eval(0.0)) / (dx - s);
        let room = (cx - z).min(wb - cx);
        if room > 0.0 && best.is_none_or(|b| room > b.0) {
            best = Some((room, x, cx));
        }
    }
    let (_, x, cx) = best.ok_or_else(|| failure("tangents", "no tangent crosses the affine side inside (z, w')"))?;
    let t = u.tangent(x)?;
    let cy = t.eval(cx);
    let w = 0.5 * (cx + wb);
    let p = KinkedLine { left: t, right: line.clone(), kink: cx };
    let prior = two_sided_prior(xb, x, cx, w, wb)?;

    let bump = |at: f64| Poly::from_local(&[0.0, 0.0, 1.0], at);
    let mut segs = vec![Segment::new(0.0, z, line.add(&bump(z)), Curvature::Convex)];
    segs.push(Segment::new(z, wb, line.clone(), Curvature::Affine));
    if wb < 1.0 {
        segs.push(Segment::new(wb, 1.0, line.add(&bump(wb)), Curvature::Convex));
    }
    let v = Payoff::new(segs)?;

    let a = prior.conditional_mean(z, wb)?;
    let optimizer = prior.pool_intervals(&[(z, wb)])?;
    Ok(Built {
        case: CraterCase::Case2,
        x_prime: xb,
        x,
        cross: (cx, cy),
        w,
        w_prime: wb,
        y,
        z,
        p,
        prior,
        v,
        optimizer,
        pooled: (z, wb),
        pooled_at: a,
        kappa: None,
    })
}

fn reflect_built(b: Built) -> Result<Built, ConstructionError> {
    let r = |m: f64| 1.0 - m;
    let p = KinkedLine { left: reflect_poly(&b.p.right), right: reflect_poly(&b.p.left), kink: r(b.p.kink) };
    Ok(Built {
        case: b.case,
        x_prime: r(b.w_prime),
        x: r(b.w),
        cross: (r(b.cross.0), b.cross.1),
        w: r(b.x),
        w_prime: r(b.x_prime),
        y: r(b.z),
        z: r(b.y),
        p,
        prior: reflect_dist(&b.prior)?,
        v: reflect_payoff(&b.v)?,
        optimizer: reflect_dist(&b.optimizer)?,
        pooled: (r(b.pooled.1), r(b.pooled.0)),
        pooled_at: r(b.pooled_at),
        kappa: b.kappa,
    })
}

fn checks(u: &Payoff, b: &Built) -> Result<CraterChecks, ConstructionError> {
    let cx = b.cross.0;
    let majorization = u
        .max_above(b.x_prime, cx, &b.p.left)
        .0
        .max(u.max_above(cx, b.w_prime, &b.p.right).0);
    let contact = (b.p.eval(b.x) - u.value(b.x)).abs().max((b.p.eval(b.w) - u.value(b.w)).abs());
    let olc = is_ordinally_less_convex(u, &b.v, &GridSpec::uniform(DEFAULT_OLC_GRID)?).holds;
    Ok(CraterChecks {
        majorization,
        contact,
        mean_error: (b.prior.mean() - cx).abs(),
        left_mean_error: (b.prior.conditional_mean(0.0, cx)? - b.x).abs(),
        right_mean_error: (b.prior.conditional_mean(cx, 1.0)? - b.w).abs(),
        c_prior: b.prior.integrated_cdf().eval(cx),
        c_optimizer: b.optimizer.integrated_cdf().eval(cx),
        olc,
    })
}

/// Builds a prior, a more convex `v` and a `v`-optimal `F` such that no
/// `u`-optimal distribution is less informative than `F`, from a crater
/// violation of `u`.
pub fn crater_counterexample(u: &Payoff) -> Result<CraterCounterexample, ConstructionError> {
    let verdict = check_crater(u)?;
    let wit = verdict.witness.ok_or(ConstructionError::NotAViolation)?;
    let pattern = crater_patterns(u)
        .into_iter()
        .find(|p| p.1 == wit.y && p.2 == wit.z)
        .ok_or_else(|| failure("pattern", "witness matches no pattern"))?;
    let (xb, y, z, wb) = pattern;
    let built = match (all_affine(u, xb, y), all_affine(u, z, wb)) {
        (true, true) => return Err(failure("pattern", "both concave sides are affine")),
        (false, false) => build_case1(u, pattern)?,
        (false, true) => build_case2(u, pattern)?,
        (true, false) => {
            let ur = reflect_payoff(u)?;
            reflect_built(build_case2(&ur, (1.0 - wb, 1.0 - z, 1.0 - y, 1.0 - xb))?)?
        }
    };
    let mirrored = all_affine(u, xb, y) && !all_affine(u, z, wb);
    let ch = checks(u, &built)?;
    let worst_mean = ch.mean_error.max(ch.left_mean_error).max(ch.right_mean_error);
    if ch.majorization > CONTACT_TOL || ch.contact > CONTACT_TOL {
        return Err(failure("support line", format!("p − u excess {:e}, contact {:e}", ch.majorization, ch.contact)));
    }
    if worst_mean > MEAN_TOL {
        return Err(failure("prior", format!("mean error {worst_mean:e}")));
    }
    if let Err(irr) = built.v.check_regular() {
        return Err(failure("v", format!("not regular: {irr}")));
    }
    if !ch.olc {
        return Err(failure("v", "v is not ordinally more convex than u"));
    }
    if ch.c_optimizer >= ch.c_prior - LEMMA5_TOL {
        return Err(failure("optimizer", format!("C_F(X) = {} not below C_F0(X) = {}", ch.c_optimizer, ch.c_prior)));
    }
    Ok(CraterCounterexample {
        case: built.case,
        mirrored,
        u: u.clone(),
        x_prime: built.x_prime,
        x: built.x,
        cross_x: built.cross.0,
        cross_y: built.cross.1,
        w: built.w,
        w_prime: built.w_prime,
        y: built.y,
        z: built.z,
        p: built.p,
        prior: built.prior,
        v: built.v,
        optimizer: built.optimizer,
        pooled: built.pooled,
        pooled_at: built.pooled_at,
        kappa: built.kappa,
        checks: ch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma5Report {
    pub pass: bool,
    pub value_u: f64,
    pub c_prior: f64,
    /// least and largest `C_F(X)` over the `u`-optimal face
    pub c_min: f64,
    pub c_max: f64,
    pub c_optimizer: f64,
    /// `C_F0(X) − C_F(X)` for the stored `v`-optimizer
    pub gap: f64,
    pub grid_size: usize,
}

/// Checks on `grid` (refined with the construction's points) that every
/// `u`-optimal distribution keeps `C(X)` at its prior value while the stored
/// `v`-optimizer lowers it.
pub fn verify_lemma5(cx: &CraterCounterexample, grid: &GridSpec) -> Result<Lemma5Report, ConstructionError> {
    let (sl, sr) = cx.p.slopes();
    if sl >= sr {
        return Err(ConstructionError::Precondition(format!("p has slopes {sl} and {sr}; no convex kink")));
    }
    let big_x = cx.cross_x;
    let grid = grid.refined_with(&[cx.x_prime, cx.x, big_x, cx.w, cx.w_prime]);
    let face = OptimalFace::new(&cx.u.grid_values(&grid), &cx.prior, &grid, None)?;
    let weight: Vec<f64> = grid.points().iter().map(|&m| (big_x - m).max(0.0)).collect();
    let neg: Vec<f64> = weight.iter().map(|c| -c).collect();
    let at = |w: &[f64]| w.iter().zip(&weight).map(|(a, b)| a * b).sum::<f64>();
    let c_max = at(&face.maximize(&weight)?);
    let c_min = at(&face.maximize(&neg)?);
    let c_prior = cx.prior.integrated_cdf().eval(big_x);
    let c_optimizer = cx.optimizer.integrated_cdf().eval(big_x);
    let gap = c_prior - c_optimizer;
    let pass = (c_min - c_prior).abs() <= LEMMA5_TOL && (c_max - c_prior).abs() <= LEMMA5_TOL && gap > LEMMA5_TOL;
    Ok(Lemma5Report { pass, value_u: face.value(), c_prior, c_min, c_max, c_optimizer, gap, grid_size: grid.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Hermite fit of `sin(π(a + b m))` with knots at the inflections.
    fn sin_fit(a: f64, b: f64) -> Payoff {
        let mut knots: Vec<f64> = (0..=24).map(|k| k as f64 / 24.0).collect();
        for k in 1..4 {
            let m = (k as f64 - a) / b;
            if m > 0.0 && m < 1.0 {
                knots.push(m);
            }
        }
        Payoff::hermite_fit(|m| (PI * (a + b * m)).sin(), |m| PI * b * (PI * (a + b * m)).cos(), &knots).unwrap()
    }

    #[test]
    fn two_sided_prior_moments() {
        let f = two_sided_prior(0.1, 0.2, 0.5, 0.7, 0.9).unwrap();
        assert!(f.is_atomless());
        assert_eq!(f.support_hull(), (0.1, 0.9));
        assert!((f.mean() - 0.5).abs() < 1e-15);
        assert!((f.conditional_mean(0.0, 0.5).unwrap() - 0.2).abs() < 1e-15);
        assert!((f.conditional_mean(0.5, 1.0).unwrap() - 0.7).abs() < 1e-15);
        assert!((f.cdf(0.5) - 0.2 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn s_shape_is_not_a_violation() {
        let u = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        assert!(matches!(crater_counterexample(&u), Err(ConstructionError::NotAViolation)));
    }

    #[test]
    fn sin_fit_violation() {
        let u = sin_fit(0.65, 1.75);
        let cx = crater_counterexample(&u).unwrap();
        assert_eq!(cx.case, CraterCase::Case1);
        assert!(!cx.mirrored);
        assert!(cx.x_prime < cx.x && cx.x < cx.cross_x && cx.cross_x < cx.w && cx.w < cx.w_prime);
        assert!(cx.cross_y > u.value(cx.cross_x));
        assert!(cx.checks.olc);
        let r = verify_lemma5(&cx, &GridSpec::uniform(201).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
        // the prior has little density just below X, so the gap is small
        assert!(r.gap > 1e-4 && r.gap < 1e-3, "{r:?}");
    }

    /// Concave on `[0, ¼]`, convex on `[¼, ½]`, affine on `[½, 1]`.
    fn affine_right() -> Payoff {
        // cubic pieces joined with matching slopes
        let left = Poly::new(vec![0.0, 1.0, -2.0]);
        let (y, z) = (0.25, 0.5);
        let (ly, dly) = (left.eval(y), left.derivative().eval(y));
        let mid = Poly::from_local(&[ly, dly, 4.0], y);
        let (mz, dmz) = (mid.eval(z), mid.derivative().eval(z));
        let right = Poly::from_local(&[mz, dmz], z);
        Payoff::new(vec![
            Segment::new(0.0, y, left, Curvature::Concave),
            Segment::new(y, z, mid, Curvature::Convex),
            Segment::new(z, 1.0, right, Curvature::Affine),
        ])
        .unwrap()
    }

    #[test]
    fn affine_side_uses_second_case() {
        let u = affine_right();
        assert!(u.is_regular());
        let cx = crater_counterexample(&u).unwrap();
        assert_eq!(cx.case, CraterCase::Case2);
        assert!(!cx.mirrored);
        assert_eq!(cx.v.segments()[1].curvature, Curvature::Affine);
        assert_eq!((cx.v.segments()[1].from, cx.v.segments()[1].to), (cx.z, cx.w_prime));
        let r = verify_lemma5(&cx, &GridSpec::uniform(101).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");

        let mirrored = crater_counterexample(&reflect_payoff(&u).unwrap()).unwrap();
        assert!(mirrored.mirrored);
        assert!((mirrored.cross_x - (1.0 - cx.cross_x)).abs() < 1e-12);
        assert!(verify_lemma5(&mirrored, &GridSpec::uniform(101).unwrap()).unwrap().pass);
    }

    #[test]
    fn lemma5_rejects_and_fails() {
        let u = sin_fit(0.65, 1.75);
        let cx = crater_counterexample(&u).unwrap();
        let mut flat = cx.clone();
        flat.p.right = flat.p.left.clone();
        assert!(matches!(verify_lemma5(&flat, &GridSpec::uniform(101).unwrap()), Err(ConstructionError::Precondition(_))));

        // shifting the left conditional mean off the tangency point
        let mut off = cx.clone();
        let shifted = 0.5 * (cx.x + cx.cross_x);
        off.prior = two_sided_prior(cx.x_prime, shifted, cx.cross_x, cx.w, cx.w_prime).unwrap();
        let r = verify_lemma5(&off, &GridSpec::uniform(201).unwrap()).unwrap();
        assert!(!r.pass, "{r:?}");
    }
}
