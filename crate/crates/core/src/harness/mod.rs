//! Seeded instance generation, theorem-level experiments and an optimality
//! certificate that does not reuse the primal simplex.

pub mod fixtures;
mod gen;

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gen::{gen_partner, gen_payoff, gen_prior, PartnerRoute, PayoffFamily, PriorFamily};

use crate::constructions::{crater_counterexample, prop1_check, theorem1_counterexample, verify_lemma5, ConstructionError};
use crate::measures::{less_informative, Atom, Distribution, GridSpec, MeasureError, ORDER_TOL};
use crate::orders::{interval_dominance_check, pool_concave, spread_convex, wso_compare, OrderError};
use crate::payoffs::{is_ordinally_less_convex, Payoff, PayoffError};
use crate::solver::{check_slackness, dual_prices, probe_argmax, solve, solve_values, SolveError, DUALITY_TOL, SLACK_TOL};

/// Tolerance for value comparisons in the experiments.
pub const VALUE_TOL: f64 = 1e-6;
/// Gain over `∫u dH` that the interval oracle counts as an improvement.
const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Thm1Suff,
    Thm1Nec,
    Thm1starInterval,
    Thm2Suff,
    Thm2Nec,
    Prop1,
    Lemma4,
    Duality,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Thm1Suff,
        ExperimentKind::Thm1Nec,
        ExperimentKind::Thm1starInterval,
        ExperimentKind::Thm2Suff,
        ExperimentKind::Thm2Nec,
        ExperimentKind::Prop1,
        ExperimentKind::Lemma4,
        ExperimentKind::Duality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Thm1Suff => "thm1-suff",
            ExperimentKind::Thm1Nec => "thm1-nec",
            ExperimentKind::Thm1starInterval => "thm1star-interval",
            ExperimentKind::Thm2Suff => "thm2-suff",
            ExperimentKind::Thm2Nec => "thm2-nec",
            ExperimentKind::Prop1 => "prop1",
            ExperimentKind::Lemma4 => "lemma4",
            ExperimentKind::Duality => "duality",
        }
    }

    fn default_grid(self) -> usize {
        match self {
            ExperimentKind::Duality | ExperimentKind::Thm2Nec => 201,
            ExperimentKind::Lemma4 => 101,
            _ => 41,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to regenerate a batch. Instance `i` uses seed
/// `seed + i`; unset families rotate through the kind's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub seed: u64,
    pub kind: ExperimentKind,
    pub family: Option<PayoffFamily>,
    pub segments: usize,
    pub prior: Option<PriorFamily>,
    pub grid: usize,
    /// members sampled from each argmax
    pub probe: usize,
}

impl InstanceSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        InstanceSpec { seed, kind, family: None, segments: 3, prior: None, grid: kind.default_grid(), probe: 8 }
    }

    pub fn with_grid(mut self, n: usize) -> Self {
        self.grid = n;
        self
    }

    pub fn with_probe(mut self, k: usize) -> Self {
        self.probe = k;
        self
    }

    fn family(&self, i: usize) -> PayoffFamily {
        use PayoffFamily::*;
        self.family.unwrap_or_else(|| {
            let pool: &[PayoffFamily] = match self.kind {
                ExperimentKind::Thm2Suff => &[Convex, Concave, SShape, Crater],
                ExperimentKind::Thm2Nec => &[Violating],
                // a swapped pair can only fail olc where the base bends both ways
                ExperimentKind::Thm1Nec => &[Random, SShape, Crater, Violating],
                _ => &[Random, SShape, Convex, Concave, Crater, Violating],
            };
            pool[i % pool.len()]
        })
    }

    fn prior(&self, i: usize) -> PriorFamily {
        self.prior.unwrap_or(match self.kind {
            ExperimentKind::Thm2Suff | ExperimentKind::Thm2Nec => PriorFamily::Uniforms(1 + i % 3),
            _ if i % 2 == 0 => PriorFamily::Atoms(2 + i % 3),
            _ => PriorFamily::Uniforms(1 + i % 3),
        })
    }

    fn route(&self, i: usize) -> PartnerRoute {
        if i % 2 == 0 {
            PartnerRoute::Compose
        } else {
            PartnerRoute::AddConvex
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceVerdict {
    pub index: usize,
    pub seed: u64,
    pub pass: bool,
    /// the quantity the verdict turned on (gap, margin, residual)
    pub residual: f64,
    pub note: String,
    pub error: Option<String>,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: InstanceSpec,
    pub count: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub worst_residual: f64,
    pub verdicts: Vec<InstanceVerdict>,
    pub millis: f64,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.count
    }
}

/// Value bracket for a candidate optimizer: `upper` is the dual objective
/// `∫p dF0`, `lower` the candidate's value on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub certified: bool,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
}

/// Certifies `candidate` against the dual program alone.
pub fn certify_optimality(
    u: &Payoff,
    f0: &Distribution,
    candidate: &Distribution,
    grid: &GridSpec,
    tol: f64,
) -> Result<Certificate, HarnessError> {
    if !less_informative(candidate, f0, ORDER_TOL).holds() || (candidate.mean() - f0.mean()).abs() > 1e-9 {
        return Err(HarnessError::Instance("candidate is not a contraction of the prior".into()));
    }
    let prices = dual_prices(u, f0, grid)?;
    let weights = candidate.discretize(grid).grid_weights(grid)?;
    let lower: f64 = weights.iter().zip(grid.points()).map(|(w, &x)| w * u.value(x)).sum();
    let gap = prices.dual_value - lower;
    Ok(Certificate { certified: gap <= tol, upper: prices.dual_value, lower, gap })
}

type Outcome = Result<(bool, f64, String), HarnessError>;

fn run_duality(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let u = gen_payoff(rng, spec.family(i), spec.segments);
    let f0 = gen_prior(rng, spec.prior(i));
    let grid = GridSpec::uniform(spec.grid)?;
    let r = solve(&u, &f0, &grid, None)?;
    let slack = check_slackness(&r, &f0, SLACK_TOL);
    let residual = r.gap.abs().max(r.residuals.affine).max(r.residuals.contact);
    let pass = r.gap.abs() <= DUALITY_TOL && slack.is_ok();
    Ok((pass, residual, format!("value {:.10} gap {:e} pivots {}", r.value, r.gap, r.pivots)))
}

fn run_prop1(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let u = gen_payoff(rng, spec.family(i), spec.segments);
    let v = gen_partner(rng, &u, PartnerRoute::Compose);
    let mu = rng.gen_range(0.05..0.95);
    let r = prop1_check(&u, &v, mu)?;
    let worst = r.failures.iter().map(|f| f.lhs - f.rhs).fold(0.0, f64::max);
    let note = format!("mu {mu:.4} [x,w] = [{:.4}, {:.4}] vs [{:.4}, {:.4}]", r.for_u.x, r.for_u.w, r.for_v.x, r.for_v.w);
    Ok((r.pass, worst, note))
}

/// Random grid-supported `H` and some `F ⪯ H`: a pooling of some atoms, the
/// point mass at the mean, or `H` itself.
fn lemma4_pair(rng: &mut ChaCha8Rng, grid: &GridSpec) -> Result<(Distribution, Distribution), HarnessError> {
    let n = grid.len();
    let k = rng.gen_range(2..=5);
    let mut idx: Vec<usize> = Vec::new();
    while idx.len() < k {
        let j = rng.gen_range(1..n - 1);
        if !idx.contains(&j) {
            idx.push(j);
        }
    }
    idx.sort_unstable();
    let ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = ws.iter().sum();
    let atoms = idx.iter().zip(&ws).map(|(&j, w)| Atom { x: grid.points()[j], w: w / total }).collect();
    let h = Distribution::normalized(atoms, vec![], 1e-12)?;
    let f = match rng.gen_range(0..4) {
        0 => Distribution::point_mass(h.mean())?,
        1 => h.clone(),
        _ => {
            let a = rng.gen_range(0..k - 1);
            let b = rng.gen_range(a + 1..k);
            let pts = grid.points();
            h.pool_intervals(&[(pts[idx[a]], pts[idx[b]])])?
        }
    };
    Ok((f, h))
}

fn run_lemma4(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let smooth = gen_payoff(rng, spec.family(i), spec.segments);
    let grid = GridSpec::uniform(spec.grid)?;
    // with kinks only at grid points the grid program is exact on [F, H]
    let u = Payoff::linear_interpolant(|m| smooth.value(m), grid.points())?;
    let (f, h) = lemma4_pair(rng, &grid)?;
    let envelope = interval_dominance_check(&u, &f, &h)?;
    // oracle: the interval program over [F, H] and H's own value
    let lp = solve_values(&u.grid_values(&grid), &h, &grid, Some(&f))?;
    let gain = lp.value - u.expectation(&h);
    let oracle = gain <= ORACLE_TOL;
    let note = format!(
        "envelope {} oracle {} gain {gain:e} shortfall {:e}",
        envelope.holds,
        oracle,
        envelope.witness.map_or(0.0, |w| w.shortfall)
    );
    Ok((envelope.holds == oracle, gain, note))
}

/// Probes for `u` and `v` on the same prior, grid and lower bound.
fn probes(
    spec: &InstanceSpec,
    u: &Payoff,
    v: &Payoff,
    f0: &Distribution,
    grid: &GridSpec,
    g0: Option<&Distribution>,
) -> Result<crate::orders::WsoVerdict, HarnessError> {
    let (pu, pv) = rayon::join(
        || probe_argmax(u, f0, grid, g0, spec.probe, spec.seed),
        || probe_argmax(v, f0, grid, g0, spec.probe, spec.seed.wrapping_add(1)),
    );
    Ok(wso_compare(&pu?, &pv?, f0, grid)?)
}

fn run_thm1_suff(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng, interval: bool) -> Outcome {
    let u = gen_payoff(rng, spec.family(i), spec.segments);
    let v = gen_partner(rng, &u, spec.route(i));
    let f0 = gen_prior(rng, spec.prior(i));
    let grid = GridSpec::uniform(spec.grid)?;
    let g0 = if interval {
        let (lo, hi) = f0.support_hull();
        let a = lo + (hi - lo) * rng.gen_range(0.2..0.9);
        Some(f0.upper_censorship(a)?.discretize(&grid))
    } else {
        None
    };
    let verdict = probes(spec, &u, &v, &f0, &grid, g0.as_ref())?;
    let note = format!("lower {} higher {} members {:?}", verdict.lower, verdict.higher, verdict.members);
    Ok((!verdict.strictly_higher, verdict.witnesses.len() as f64, note))
}

fn run_thm1_nec(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let olc_grid = GridSpec::uniform(61)?;
    for _ in 0..10 {
        let base = gen_payoff(rng, spec.family(i), spec.segments);
        // the partner is more convex, so the swapped pair fails
        let u = gen_partner(rng, &base, spec.route(i));
        let Some(w) = is_ordinally_less_convex(&u, &base, &olc_grid).witness else { continue };
        let cx = theorem1_counterexample(&u, &base, &w, &GridSpec::uniform(spec.grid)?)?;
        let note = format!("{:?} x {:.4} z {:.4} beta {:.4}", cx.case, w.x, w.z, cx.beta);
        return Ok((cx.verdict.strictly_higher, cx.verdict.witnesses.len() as f64, note));
    }
    Err(HarnessError::Instance("no failing pair after 10 draws".into()))
}

fn run_thm2_suff(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let u = gen_payoff(rng, spec.family(i), spec.segments);
    let v = gen_partner(rng, &u, spec.route(i));
    let f0 = gen_prior(rng, spec.prior(i));
    let grid = GridSpec::uniform(spec.grid)?;
    let (pu, pv) = rayon::join(
        || probe_argmax(&u, &f0, &grid, None, spec.probe, spec.seed),
        || probe_argmax(&v, &f0, &grid, None, spec.probe, spec.seed.wrapping_add(1)),
    );
    let (pu, pv) = (pu?, pv?);
    let verdict = wso_compare(&pu, &pv, &f0, &grid)?;
    // pooling keeps u-optimality, spreading keeps v-optimality
    let f0_grid = f0.discretize(&grid);
    let mut worst: f64 = 0.0;
    for g in pu.all_members() {
        worst = worst.max(pu.value - u.expectation(&pool_concave(g, &u)?));
    }
    for h in pv.all_members() {
        worst = worst.max(pv.value - v.expectation(&spread_convex(h, &v, &f0_grid)?));
    }
    let pass = verdict.lower && worst <= VALUE_TOL;
    Ok((pass, worst, format!("lower {} higher {} loss {worst:e}", verdict.lower, verdict.higher)))
}

fn run_thm2_nec(spec: &InstanceSpec, i: usize, rng: &mut ChaCha8Rng) -> Outcome {
    let u = gen_payoff(rng, spec.family(i), spec.segments);
    let cx = crater_counterexample(&u)?;
    let r = verify_lemma5(&cx, &GridSpec::uniform(spec.grid)?)?;
    let spread = (r.c_min - r.c_prior).abs().max((r.c_max - r.c_prior).abs());
    Ok((r.pass, spread, format!("{:?} X {:.4} gap {:e}", cx.case, cx.cross_x, r.gap)))
}

fn run_one(spec: &InstanceSpec, i: usize) -> InstanceVerdict {
    let seed = spec.seed.wrapping_add(i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let out = match spec.kind {
        ExperimentKind::Duality => run_duality(spec, i, &mut rng),
        ExperimentKind::Prop1 => run_prop1(spec, i, &mut rng),
        ExperimentKind::Lemma4 => run_lemma4(spec, i, &mut rng),
        ExperimentKind::Thm1Suff => run_thm1_suff(spec, i, &mut rng, false),
        ExperimentKind::Thm1starInterval => run_thm1_suff(spec, i, &mut rng, true),
        ExperimentKind::Thm1Nec => run_thm1_nec(spec, i, &mut rng),
        ExperimentKind::Thm2Suff => run_thm2_suff(spec, i, &mut rng),
        ExperimentKind::Thm2Nec => run_thm2_nec(spec, i, &mut rng),
    };
    let millis = start.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok((pass, residual, note)) => InstanceVerdict { index: i, seed, pass, residual, note, error: None, millis },
        Err(e) => InstanceVerdict {
            index: i,
            seed,
            pass: false,
            residual: f64::NAN,
            note: String::new(),
            error: Some(e.to_string()),
            millis,
        },
    }
}

/// Runs `count` seeded instances in parallel; verdicts come back in index
/// order and failures of single instances do not stop the batch.
pub fn run_experiment(spec: &InstanceSpec, count: usize) -> ExperimentReport {
    let start = Instant::now();
    let verdicts: Vec<InstanceVerdict> = (0..count).into_par_iter().map(|i| run_one(spec, i)).collect();
    let passed = verdicts.iter().filter(|v| v.pass).count();
    let errors = verdicts.iter().filter(|v| v.error.is_some()).count();
    let worst_residual = verdicts.iter().map(|v| v.residual).filter(|r| r.is_finite()).fold(0.0, f64::max);
    ExperimentReport {
        spec: spec.clone(),
        count,
        passed,
        failed: count - passed - errors,
        errors,
        worst_residual,
        verdicts,
        millis: start.elapsed().as_secs_f64() * 1e3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::Curvature;
    use crate::solver::upper_censorship_solve;

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("thm3".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn certificate_examples() {
        let grid = GridSpec::uniform(101).unwrap();
        let f0 = Distribution::uniform(0.0, 1.0).unwrap();
        let cave = Payoff::polynomial(vec![0.0, 1.0, -1.0], Curvature::Concave);
        let pooled = Distribution::point_mass(0.5).unwrap();
        let c = certify_optimality(&cave, &f0, &pooled, &grid, 1e-6).unwrap();
        assert!(c.certified && c.gap.abs() < 1e-9, "{c:?}");
        let bad = certify_optimality(&cave, &f0, &f0, &grid, 1e-6).unwrap();
        assert!(!bad.certified);
        // u(½) − ∫u dF0 = ¼ − 1/6, up to the grid's second-moment error
        assert!((bad.gap - (0.25 - 1.0 / 6.0)).abs() < 1e-4, "{bad:?}");
        let v = crate::harness::fixtures::s_shape();
        let cens = upper_censorship_solve(&v, &f0).unwrap();
        let s = certify_optimality(&v, &f0, &cens.distribution, &grid, 2e-3).unwrap();
        assert!(s.certified, "{s:?}");
    }

    #[test]
    fn batches_are_deterministic() {
        let spec = InstanceSpec::new(ExperimentKind::Duality, 7).with_grid(41);
        let a = run_experiment(&spec, 6);
        let b = run_experiment(&spec, 6);
        let strip = |r: &ExperimentReport| r.verdicts.iter().map(|v| (v.pass, v.residual.to_bits(), v.note.clone())).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.verdicts.len(), 6);
        assert!(a.all_passed(), "{:?}", a.verdicts);
    }

    #[test]
    fn small_batches_pass() {
        for kind in [ExperimentKind::Prop1, ExperimentKind::Lemma4, ExperimentKind::Thm1Suff, ExperimentKind::Thm1Nec] {
            let spec = InstanceSpec::new(kind, 3).with_grid(31).with_probe(3);
            let r = run_experiment(&spec, 4);
            assert!(r.all_passed(), "{kind}: {:?}", r.verdicts);
        }
    }
}
