//! The sender's problem on a grid: maximise `Σ u(x_i) f_i` over distributions
//! `F` that are mean-preserving contractions of the prior (and, in interval
//! mode, mean-preserving spreads of a lower bound `G0`).

pub mod lp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{Distribution, GridSpec, MeasureError};
use crate::payoffs::{Payoff, PayoffError};
use lp::{Lp, LpError, RowKind, Simplex};

/// Threshold for "the primal and dual values agree".
pub const DUALITY_TOL: f64 = 1e-8;
/// Default tolerance for complementary-slackness residuals.
pub const SLACK_TOL: f64 = 1e-6;
const FACE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
}

fn lp_failure(e: LpError, what: &str) -> SolveError {
    match e {
        LpError::Infeasible(r) => SolveError::Infeasible(format!("{what}: phase one residual {r:e}")),
        other => SolveError::NumericFailure(format!("{what}: {other}")),
    }
}

/// `C(x_j) = Σ_{i<j} w_i (x_j − x_i)` at every grid point.
pub fn integrated_on_grid(xs: &[f64], w: &[f64]) -> Vec<f64> {
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut out = Vec::with_capacity(xs.len());
    for (j, &x) in xs.iter().enumerate() {
        out.push((x * s0 - s1).max(0.0));
        s0 += w[j];
        s1 += w[j] * x;
    }
    out
}

/// The grid program with its constraint data.
#[derive(Debug, Clone, PartialEq)]
pub struct PersuasionLp {
    pub grid: GridSpec,
    /// `u(x_i)`.
    pub objective: Vec<f64>,
    pub prior_weights: Vec<f64>,
    pub c_prior: Vec<f64>,
    pub c_lower: Option<Vec<f64>>,
    pub mean: f64,
    /// first and last grid index of the prior's support
    pub lo: usize,
    pub hi: usize,
}

impl PersuasionLp {
    pub fn new(values: &[f64], f0: &Distribution, grid: &GridSpec, g0: Option<&Distribution>) -> Result<Self, SolveError> {
        if values.len() != grid.len() {
            return Err(SolveError::Grid("payoff vector does not match grid".into()));
        }
        let xs = grid.points();
        let w0 = f0.discretize(grid).grid_weights(grid)?;
        let lo = w0.iter().position(|w| *w > 1e-15).unwrap_or(0);
        let hi = w0.iter().rposition(|w| *w > 1e-15).unwrap_or(0);
        let c_prior = integrated_on_grid(xs, &w0);
        let c_lower = match g0 {
            Some(g) => {
                let wg = g.discretize(grid).grid_weights(grid)?;
                let c = integrated_on_grid(xs, &wg);
                if (f0.mean() - g.mean()).abs() > 1e-9 {
                    return Err(SolveError::Infeasible(format!("means differ: {} vs {}", f0.mean(), g.mean())));
                }
                if let Some(j) = (0..xs.len()).find(|&j| c[j] > c_prior[j] + 1e-9) {
                    return Err(SolveError::Infeasible(format!("lower bound is more informative at {}", xs[j])));
                }
                Some(c)
            }
            None => None,
        };
        Ok(PersuasionLp {
            grid: grid.clone(),
            objective: values.to_vec(),
            prior_weights: w0,
            c_prior,
            c_lower,
            mean: f0.mean(),
            lo,
            hi,
        })
    }

    fn width(&self) -> usize {
        self.hi - self.lo + 1
    }

    fn primal_lp(&self, objective: &[f64]) -> Lp {
        let xs = self.grid.points();
        let cols = self.lo..=self.hi;
        let mut lp = Lp::new(objective[cols.clone()].to_vec());
        lp.push(vec![1.0; self.width()], RowKind::Eq, 1.0);
        lp.push(xs[cols.clone()].to_vec(), RowKind::Eq, self.mean);
        for j in self.lo + 1..self.hi {
            let row: Vec<f64> = cols.clone().map(|i| (xs[j] - xs[i]).max(0.0)).collect();
            let cf = self.c_prior[j];
            match &self.c_lower {
                Some(cg) if cg[j] >= cf - 1e-12 => lp.push(row, RowKind::Eq, cf),
                Some(cg) if cg[j] > 1e-15 => {
                    lp.push(row.clone(), RowKind::Le, cf);
                    lp.push(row, RowKind::Ge, cg[j]);
                }
                _ => lp.push(row, RowKind::Le, cf),
            }
        }
        lp
    }

    fn weights_from(&self, f: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.len()];
        w[self.lo..=self.hi].copy_from_slice(f);
        w
    }

    /// Largest violation of the feasibility constraints by a grid vector.
    pub fn infeasibility(&self, w: &[f64]) -> f64 {
        let xs = self.grid.points();
        let c = integrated_on_grid(xs, w);
        let mass: f64 = w.iter().sum();
        let mean: f64 = w.iter().zip(xs).map(|(a, x)| a * x).sum();
        let mut worst = (mass - 1.0).abs().max((mean - self.mean).abs());
        worst = worst.max(w.iter().fold(0.0, |m, &a| m.max(-a)));
        for j in 0..xs.len() {
            worst = worst.max(c[j] - self.c_prior[j]);
            if let Some(cg) = &self.c_lower {
                worst = worst.max(cg[j] - c[j]);
            }
        }
        worst
    }

    fn solve_primal(&self) -> Result<Simplex, SolveError> {
        Simplex::solve(&self.primal_lp(&self.objective)).map_err(|e| lp_failure(e, "primal"))
    }

    /// Solves the dual program as its own LP. Returns the dual value and, in
    /// the plain (non-interval) case, the price function.
    pub fn solve_dual(&self) -> Result<(f64, Option<PriceFunction>), SolveError> {
        let xs = self.grid.points();
        let (lo, hi) = (self.lo, self.hi);
        let u = &self.objective;
        let interior: Vec<usize> = (lo + 1..hi).collect();
        let lower: Vec<usize> = match &self.c_lower {
            Some(cg) => interior.iter().copied().filter(|&j| cg[j] > 1e-15).collect(),
            None => vec![],
        };
        // p_i = t0 + t⁺ − t⁻ + (λ⁺ − λ⁻) x_i + Σ y_j h_j(x_i) − Σ z_j h_j(x_i),
        // h_j(x) = (x_j − x)⁺; t0 = max u makes the slack basis feasible
        let t0 = u[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ny = interior.len();
        let nz = lower.len();
        let mut cost = vec![-1.0, 1.0, -self.mean, self.mean];
        cost.extend(interior.iter().map(|&j| -self.c_prior[j]));
        if let Some(cg) = &self.c_lower {
            cost.extend(lower.iter().map(|&j| cg[j]));
        }
        let mut lp = Lp::new(cost);
        for i in lo..=hi {
            let mut row = vec![1.0, -1.0, xs[i], -xs[i]];
            row.extend(interior.iter().map(|&j| (xs[j] - xs[i]).max(0.0)));
            row.extend(lower.iter().map(|&j| -(xs[j] - xs[i]).max(0.0)));
            lp.push(row, RowKind::Ge, u[i] - t0);
        }
        let s = Simplex::solve(&lp).map_err(|e| match e {
            LpError::Unbounded => SolveError::Infeasible("dual unbounded".into()),
            e => lp_failure(e, "dual"),
        })?;
        let v = s.primal();
        let t = t0 + v[0] - v[1];
        let lambda = v[2] - v[3];
        let y = &v[4..4 + ny];
        let z = &v[4 + ny..4 + ny + nz];
        let mut value = t + lambda * self.mean;
        value += interior.iter().zip(y).map(|(&j, a)| a * self.c_prior[j]).sum::<f64>();
        if let Some(cg) = &self.c_lower {
            value -= lower.iter().zip(z).map(|(&j, a)| a * cg[j]).sum::<f64>();
        }
        if self.c_lower.is_some() {
            return Ok((value, None));
        }
        let inside: Vec<f64> = (lo..=hi)
            .map(|i| {
                let hinge: f64 = interior.iter().zip(y).map(|(&j, a)| a * (xs[j] - xs[i]).max(0.0)).sum();
                t + lambda * xs[i] + hinge
            })
            .collect();
        let prices = PriceFunction::extend(xs, u, lo, &inside, value);
        Ok((value, Some(prices)))
    }
}

/// Convex piecewise-linear majorant of the payoff on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceFunction {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    /// `Σ w0_i p_i` as computed by the dual program.
    pub dual_value: f64,
}

impl PriceFunction {
    /// Extends prices known on grid indices `lo..lo + inside.len()` linearly
    /// outside, steep enough to stay above `u` and convex.
    fn extend(xs: &[f64], u: &[f64], lo: usize, inside: &[f64], dual_value: f64) -> PriceFunction {
        let hi = lo + inside.len() - 1;
        let mut values = vec![0.0; xs.len()];
        values[lo..=hi].copy_from_slice(inside);
        if lo > 0 {
            let mut s = if hi > lo { (inside[1] - inside[0]) / (xs[lo + 1] - xs[lo]) } else { 0.0 };
            for i in 0..lo {
                s = s.min((inside[0] - u[i]) / (xs[lo] - xs[i]));
            }
            for i in 0..lo {
                values[i] = inside[0] + s * (xs[i] - xs[lo]);
            }
        }
        if hi + 1 < xs.len() {
            let k = inside.len();
            let mut s = if hi > lo { (inside[k - 1] - inside[k - 2]) / (xs[hi] - xs[hi - 1]) } else { 0.0 };
            for i in hi + 1..xs.len() {
                s = s.max((u[i] - inside[k - 1]) / (xs[i] - xs[hi]));
            }
            for i in hi + 1..xs.len() {
                values[i] = inside[k - 1] + s * (xs[i] - xs[hi]);
            }
        }
        PriceFunction { xs: xs.to_vec(), values, dual_value }
    }

    /// Linear interpolation between grid points.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&p| p <= x).clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }

    /// Slope change at each interior grid point (zero at the ends).
    pub fn kinks(&self) -> Vec<f64> {
        let (x, p) = (&self.xs, &self.values);
        let mut k = vec![0.0; x.len()];
        for j in 1..x.len().saturating_sub(1) {
            k[j] = (p[j + 1] - p[j]) / (x[j + 1] - x[j]) - (p[j] - p[j - 1]) / (x[j] - x[j - 1]);
        }
        k
    }

    /// Smallest second difference, in slope units.
    pub fn convexity_defect(&self) -> f64 {
        self.kinks().iter().fold(0.0, |m, &k| m.max(-k))
    }

    /// Largest amount by which `u` exceeds `p` on the grid.
    pub fn majorization_defect(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.values).fold(0.0, |m, (a, p)| m.max(a - p))
    }

    /// `Σ w_i p_i` against grid weights.
    pub fn integrate(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.values).map(|(a, p)| a * p).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SlacknessResiduals {
    /// largest |kink of p| where `C_F < C_F0`
    pub affine: f64,
    /// largest `p − u` on the support of the optimizer
    pub contact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub value: f64,
    pub optimizer: Distribution,
    pub grid: GridSpec,
    pub weights: Vec<f64>,
    /// `u(x_i)`.
    pub payoff: Vec<f64>,
    /// `None` in interval mode, where the dual multipliers no longer form a
    /// convex price.
    pub prices: Option<PriceFunction>,
    pub dual_value: f64,
    /// `dual − primal`.
    pub gap: f64,
    pub residuals: SlacknessResiduals,
    pub pivots: usize,
}

/// Every grid point where the payoff is discontinuous or kinked must be a
/// grid point, or the grid program misstates the payoff.
pub fn validate_grid(u: &Payoff, grid: &GridSpec) -> Result<(), SolveError> {
    match u.rough_points().into_iter().find(|&b| !grid.contains(b)) {
        Some(b) => Err(SolveError::Grid(format!("payoff breakpoint {b} is not a grid point"))),
        None => Ok(()),
    }
}

pub fn solve(u: &Payoff, f0: &Distribution, grid: &GridSpec, g0: Option<&Distribution>) -> Result<SolveReport, SolveError> {
    validate_grid(u, grid)?;
    solve_values(&u.grid_values(grid), f0, grid, g0)
}

/// [`solve`] for a payoff given by its grid values.
pub fn solve_values(values: &[f64], f0: &Distribution, grid: &GridSpec, g0: Option<&Distribution>) -> Result<SolveReport, SolveError> {
    let prog = PersuasionLp::new(values, f0, grid, g0)?;
    let s = prog.solve_primal()?;
    let weights = prog.weights_from(&s.primal());
    let bad = prog.infeasibility(&weights);
    if bad > 1e-8 {
        return Err(SolveError::NumericFailure(format!(
            "primal solution violates constraints by {bad:e} after {} pivots",
            s.pivots
        )));
    }
    let value: f64 = weights.iter().zip(values).map(|(a, b)| a * b).sum();
    let (dual_value, prices) = prog.solve_dual()?;
    let gap = dual_value - value;
    if gap < -DUALITY_TOL * (1.0 + value.abs()) {
        return Err(SolveError::NumericFailure(format!("negative duality gap {gap:e}")));
    }
    let residuals = match &prices {
        Some(p) => slackness_residuals(&prog, &weights, p, SLACK_TOL),
        None => SlacknessResiduals::default(),
    };
    Ok(SolveReport {
        value,
        optimizer: Distribution::from_grid_weights(grid, &weights)?,
        grid: grid.clone(),
        weights,
        payoff: values.to_vec(),
        prices,
        dual_value,
        gap,
        residuals,
        pivots: s.pivots,
    })
}

pub fn dual_prices(u: &Payoff, f0: &Distribution, grid: &GridSpec) -> Result<PriceFunction, SolveError> {
    validate_grid(u, grid)?;
    let prog = PersuasionLp::new(&u.grid_values(grid), f0, grid, None)?;
    let (_, p) = prog.solve_dual()?;
    Ok(p.expect("plain mode yields prices"))
}

fn slackness_residuals(prog: &PersuasionLp, w: &[f64], p: &PriceFunction, tol: f64) -> SlacknessResiduals {
    let c = integrated_on_grid(prog.grid.points(), w);
    let kinks = p.kinks();
    let affine = (prog.lo + 1..prog.hi)
        .filter(|&j| c[j] < prog.c_prior[j] - tol)
        .fold(0.0_f64, |m, j| m.max(kinks[j].abs()));
    let contact = (0..w.len())
        .filter(|&i| w[i] >= tol)
        .fold(0.0_f64, |m, i| m.max(p.values[i] - prog.objective[i]));
    SlacknessResiduals { affine, contact }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlacknessKind {
    /// price kinked where the optimizer leaves slack
    NotAffine,
    /// price above the payoff on the optimizer's support
    OffContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlacknessViolation {
    pub kind: SlacknessKind,
    pub at: f64,
    pub residual: f64,
}

/// Checks both complementary-slackness conditions of a plain-mode report.
pub fn check_slackness(report: &SolveReport, f0: &Distribution, tol: f64) -> Result<(), Vec<SlacknessViolation>> {
    let Some(p) = &report.prices else {
        return Ok(());
    };
    let xs = report.grid.points();
    let w0 = f0.discretize(&report.grid).grid_weights(&report.grid).unwrap_or_else(|_| vec![0.0; xs.len()]);
    let c0 = integrated_on_grid(xs, &w0);
    let c = integrated_on_grid(xs, &report.weights);
    let kinks = p.kinks();
    let mut out = Vec::new();
    for j in 1..xs.len().saturating_sub(1) {
        if c[j] < c0[j] - tol && kinks[j].abs() > tol {
            out.push(SlacknessViolation { kind: SlacknessKind::NotAffine, at: xs[j], residual: kinks[j].abs() });
        }
    }
    for i in 0..xs.len() {
        let r = p.values[i] - report.payoff[i];
        if report.weights[i] >= tol && r > tol {
            out.push(SlacknessViolation { kind: SlacknessKind::OffContact, at: xs[i], residual: r });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// The optimal face of the grid program, kept as a simplex tableau whose
/// non-optimal columns are frozen, so that secondary objectives can be
/// optimised over it.
#[derive(Debug, Clone)]
pub struct OptimalFace {
    prog: PersuasionLp,
    simplex: Simplex,
    value: f64,
}

impl OptimalFace {
    pub fn new(values: &[f64], f0: &Distribution, grid: &GridSpec, g0: Option<&Distribution>) -> Result<Self, SolveError> {
        let prog = PersuasionLp::new(values, f0, grid, g0)?;
        let mut simplex = prog.solve_primal()?;
        let value = prog.weights_from(&simplex.primal()).iter().zip(values).map(|(a, b)| a * b).sum();
        simplex.restrict_to_optimal_face(FACE_TOL);
        Ok(OptimalFace { prog, simplex, value })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn program(&self) -> &PersuasionLp {
        &self.prog
    }

    /// Grid weights of a face member maximising `c` (indexed by grid point).
    pub fn maximize(&self, c: &[f64]) -> Result<Vec<f64>, SolveError> {
        let mut s = self.simplex.clone();
        s.reoptimize(&c[self.prog.lo..=self.prog.hi]).map_err(|e| lp_failure(e, "face"))?;
        let w = self.prog.weights_from(&s.primal());
        let v: f64 = w.iter().zip(&self.prog.objective).map(|(a, b)| a * b).sum();
        if (v - self.value).abs() > DUALITY_TOL * (1.0 + self.value.abs()) {
            return Err(SolveError::NumericFailure(format!("face member value {v} drifted from {}", self.value)));
        }
        let bad = self.prog.infeasibility(&w);
        if bad > 1e-8 {
            return Err(SolveError::NumericFailure(format!("face member infeasible by {bad:e}")));
        }
        Ok(w)
    }

    /// Column weights `Σ_j (x_j − x_i)⁺`, so that `Σ_i f_i k_i = Σ_j C_F(x_j)`.
    pub fn spread_weights(&self) -> Vec<f64> {
        let xs = self.prog.grid.points();
        let n = xs.len();
        // Σ_{j>i} (x_j − x_i) with suffix sums
        let mut out = vec![0.0; n];
        let (mut cnt, mut sum) = (0.0, 0.0);
        for i in (0..n).rev() {
            out[i] = sum - cnt * xs[i];
            cnt += 1.0;
            sum += xs[i];
        }
        out
    }

    /// Face members minimising and maximising `Σ_j C_F(x_j)`.
    pub fn extremes(&self) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
        let k = self.spread_weights();
        let neg: Vec<f64> = k.iter().map(|a| -a).collect();
        Ok((self.maximize(&neg)?, self.maximize(&k)?))
    }
}

/// A finite sample of an argmax set together with the data needed to re-pose
/// the program it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxProbe {
    pub value: f64,
    pub members: Vec<Distribution>,
    /// face member with the smallest `Σ_j C_F(x_j)`
    pub least: Option<Distribution>,
    /// face member with the largest `Σ_j C_F(x_j)`
    pub most: Option<Distribution>,
    pub grid: GridSpec,
    pub payoff: Vec<f64>,
    pub prior: Distribution,
    pub lower: Option<Distribution>,
    pub seed: u64,
}

impl ArgmaxProbe {
    /// Sampled members followed by the two canonical ones.
    pub fn all_members(&self) -> impl Iterator<Item = &Distribution> {
        self.members.iter().chain(self.least.iter()).chain(self.most.iter())
    }
}

pub fn probe_argmax(
    u: &Payoff,
    f0: &Distribution,
    grid: &GridSpec,
    g0: Option<&Distribution>,
    k: usize,
    seed: u64,
) -> Result<ArgmaxProbe, SolveError> {
    validate_grid(u, grid)?;
    probe_values(&u.grid_values(grid), f0, grid, g0, k, seed)
}

/// [`probe_argmax`] for a payoff given by its grid values.
pub fn probe_values(
    values: &[f64],
    f0: &Distribution,
    grid: &GridSpec,
    g0: Option<&Distribution>,
    k: usize,
    seed: u64,
) -> Result<ArgmaxProbe, SolveError> {
    let face = OptimalFace::new(values, f0, grid, g0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<Vec<f64>> = Vec::new();
    let push = |w: Vec<f64>, into: &mut Vec<Vec<f64>>| {
        let dup = into.iter().any(|o| o.iter().zip(&w).all(|(a, b)| (a - b).abs() <= 1e-10));
        if !dup {
            into.push(w);
        }
    };
    for _ in 0..k {
        let c: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        push(face.maximize(&c)?, &mut weights);
    }
    let (least, most) = face.extremes()?;
    let members = weights
        .iter()
        .map(|w| Distribution::from_grid_weights(grid, w))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ArgmaxProbe {
        value: face.value(),
        members,
        least: Some(Distribution::from_grid_weights(grid, &least)?),
        most: Some(Distribution::from_grid_weights(grid, &most)?),
        grid: grid.clone(),
        payoff: values.to_vec(),
        prior: f0.clone(),
        lower: g0.cloned(),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootStatus {
    Bracketed,
    /// the residual kept one sign; the boundary it points to was returned
    NoRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Censorship {
    /// cutoff: states below are revealed
    pub a: f64,
    /// conditional mean of the pooled upper tail
    pub b: f64,
    pub distribution: Distribution,
    pub residual: f64,
    pub status: RootStatus,
}

const CENSOR_SCAN: usize = 400;

/// Upper censorship whose cutoff satisfies the tangency condition
/// `v(b) − v(a) = v′(b)(b − a)` with `b` the conditional mean above `a`.
pub fn upper_censorship_solve(v: &Payoff, f0: &Distribution) -> Result<Censorship, SolveError> {
    let (lo, hi) = f0.support_hull();
    if hi <= lo {
        return Ok(Censorship { a: lo, b: lo, distribution: f0.clone(), residual: 0.0, status: RootStatus::NoRoot });
    }
    let upper = |a: f64| f0.conditional_mean(a, hi);
    let residual = |a: f64| -> Result<(f64, f64), SolveError> {
        let b = upper(a)?;
        Ok((v.slope(b) * (b - a) - (v.value(b) - v.value(a)), b))
    };
    let at = |k: usize| lo + (hi - lo) * k as f64 / CENSOR_SCAN as f64;
    let mut prev = (at(0), residual(at(0))?.0);
    let mut bracket = None;
    let mut sign_seen = prev.1;
    for k in 1..CENSOR_SCAN {
        let a = at(k);
        let r = residual(a)?.0;
        if r == 0.0 || (r > 0.0) != (prev.1 > 0.0) && prev.1 != 0.0 {
            bracket = Some((prev.0, prev.1, a, r));
            break;
        }
        if sign_seen == 0.0 {
            sign_seen = r;
        }
        prev = (a, r);
    }
    let Some((mut l, rl, mut r, rr)) = bracket else {
        // convex-like residual: reveal everything; concave-like: pool everything
        let reveal = sign_seen >= 0.0;
        let a = if reveal { hi } else { lo };
        let distribution = if reveal { f0.clone() } else { f0.upper_censorship(lo)? };
        let b = if reveal { hi } else { f0.mean() };
        let res = if reveal { 0.0 } else { residual(lo)?.0 };
        return Ok(Censorship { a, b, distribution, residual: res, status: RootStatus::NoRoot });
    };
    if rr == 0.0 {
        l = r;
    } else if rl != 0.0 {
        let pos_left = rl > 0.0;
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            let rm = residual(m)?.0;
            if rm == 0.0 || r - l < 1e-15 {
                l = m;
                r = m;
                break;
            }
            if (rm > 0.0) == pos_left {
                l = m;
            } else {
                r = m;
            }
        }
    }
    let a = if residual(l)?.0.abs() <= residual(r)?.0.abs() { l } else { r };
    let (res, b) = residual(a)?;
    if res.abs() > 1e-10 {
        return Err(SolveError::NumericFailure(format!("tangency residual {res:e} at a = {a}")));
    }
    Ok(Censorship { a, b, distribution: f0.upper_censorship(a)?, residual: res, status: RootStatus::Bracketed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::Curvature;

    fn uniform() -> Distribution {
        Distribution::uniform(0.0, 1.0).unwrap()
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::uniform(n).unwrap()
    }

    #[test]
    fn convex_payoff_reveals_everything() {
        let u = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let g = grid(51);
        let r = solve(&u, &uniform(), &g, None).unwrap();
        let d = uniform().discretize(&g);
        assert!(r.optimizer.distance(&d) < 1e-9);
        assert!((r.value - u.expectation(&d)).abs() < 1e-12);
        assert!(r.gap.abs() < 1e-8);
        let p = r.prices.as_ref().unwrap();
        assert!(p.values.iter().zip(&r.payoff).all(|(a, b)| (a - b).abs() < 1e-8));
        assert!(check_slackness(&r, &uniform(), 1e-6).is_ok());
    }

    #[test]
    fn concave_payoff_pools() {
        let u = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        let f0 = Distribution::uniform(0.1, 0.7).unwrap();
        let r = solve(&u, &f0, &grid(61), None).unwrap();
        assert!((r.value - u.value(0.4)).abs() < 1e-10);
        assert!(r.optimizer.distance(&Distribution::point_mass(0.4).unwrap()) < 1e-9);
        let p = r.prices.unwrap();
        assert!(p.convexity_defect() < 1e-9);
        // affine on the prior's support
        assert!(p.kinks()[7..=41].iter().all(|k| k.abs() < 1e-7));
        assert!((p.dual_value - r.value).abs() < 1e-8);
    }

    #[test]
    fn step_payoff_pools_at_threshold() {
        let r = solve(&Payoff::step(0.5), &uniform(), &grid(41), None).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.optimizer.distance(&Distribution::point_mass(0.5).unwrap()) < 1e-9);
    }

    #[test]
    fn breakpoints_must_lie_on_grid() {
        assert!(matches!(solve(&Payoff::step(0.5), &uniform(), &grid(40), None), Err(SolveError::Grid(_))));
    }

    #[test]
    fn degenerate_interval_returns_prior() {
        let u = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let f0 = Distribution::uniform(0.2, 0.9).unwrap();
        let g = grid(36);
        let r = solve(&u, &f0, &g, Some(&f0)).unwrap();
        assert!(r.optimizer.distance(&f0.discretize(&g)) < 1e-9);
        assert!(r.prices.is_none());
        assert!(r.gap.abs() < 1e-8);
    }

    #[test]
    fn inconsistent_lower_bound_is_infeasible() {
        let u = Payoff::inferred(vec![0.0, 1.0]);
        let f0 = Distribution::uniform(0.25, 0.75).unwrap();
        let g0 = uniform();
        assert!(matches!(solve(&u, &f0, &grid(21), Some(&g0)), Err(SolveError::Infeasible(_))));
    }

    #[test]
    fn s_shape_duality_and_slackness() {
        let u = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let r = solve(&u, &uniform(), &grid(101), None).unwrap();
        assert!(r.gap.abs() < 1e-8, "gap {}", r.gap);
        assert!(r.residuals.affine < 1e-6 && r.residuals.contact < 1e-6, "{:?}", r.residuals);
        assert_eq!(check_slackness(&r, &uniform(), 1e-6), Ok(()));
    }

    #[test]
    fn censorship_cutoff_for_smoothstep() {
        // independent oracle: with U[0,1], b = (1 + a)/2 and the tangency
        // condition reduces to a polynomial in a, solved here by Newton
        let v = |m: f64| 3.0 * m * m - 2.0 * m.powi(3);
        let dv = |m: f64| 6.0 * m - 6.0 * m * m;
        let g = |a: f64| {
            let b = 0.5 * (1.0 + a);
            dv(b) * (b - a) - (v(b) - v(a))
        };
        let mut a = 0.3;
        for _ in 0..60 {
            let h = 1e-7;
            a -= g(a) / ((g(a + h) - g(a - h)) / (2.0 * h));
        }
        let u = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let c = upper_censorship_solve(&u, &uniform()).unwrap();
        assert_eq!(c.status, RootStatus::Bracketed);
        assert!((c.a - a).abs() < 1e-8, "{} vs {}", c.a, a);
        assert!((c.b - 0.5 * (1.0 + a)).abs() < 1e-8);
        assert!(c.residual.abs() <= 1e-10);
        let r = solve(&u, &uniform(), &grid(401), None).unwrap();
        assert!((r.value - u.expectation(&c.distribution)).abs() < 2e-3);
    }

    #[test]
    fn censorship_degenerate_cases() {
        let convex = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let c = upper_censorship_solve(&convex, &uniform()).unwrap();
        assert_eq!(c.status, RootStatus::NoRoot);
        assert_eq!(c.a, 1.0);
        assert!(c.distribution.distance(&uniform()) < 1e-15);
        let concave = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        let c = upper_censorship_solve(&concave, &uniform()).unwrap();
        assert_eq!(c.status, RootStatus::NoRoot);
        assert!((c.b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn censorship_quadratic_then_affine() {
        // v = m² on [0, ½], then its tangent line m − ¼
        let v = Payoff::new(vec![
            crate::payoffs::Segment::new(0.0, 0.5, crate::Poly::new(vec![0.0, 0.0, 1.0]), Curvature::Convex),
            crate::payoffs::Segment::new(0.5, 1.0, crate::Poly::new(vec![-0.25, 1.0]), Curvature::Affine),
        ])
        .unwrap();
        let c = upper_censorship_solve(&v, &uniform()).unwrap();
        // b on the line: b − a = b − ¼ − a², so a = ½ and b = ¾
        assert!((c.a - 0.5).abs() < 1e-6, "{}", c.a);
        assert!((c.b - 0.75).abs() < 1e-6);
    }

    #[test]
    fn probes() {
        // strictly concave: a single member, δ_μ
        let u = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        let p = probe_argmax(&u, &uniform(), &grid(21), None, 4, 7).unwrap();
        assert!(p.all_members().all(|m| m.distance(&Distribution::point_mass(0.5).unwrap()) < 1e-9));
        assert_eq!(p.members.len(), 1);

        // affine: everything is optimal, and the canonical members are the
        // two extremes of the feasible set
        let u = Payoff::polynomial(vec![0.2, 0.5], Curvature::Affine);
        let g = grid(21);
        let p = probe_argmax(&u, &uniform(), &g, None, 6, 7).unwrap();
        assert!(p.members.len() > 1);
        assert!(p.least.as_ref().unwrap().distance(&Distribution::point_mass(0.5).unwrap()) < 1e-9);
        assert!(p.most.as_ref().unwrap().distance(&uniform().discretize(&g)) < 1e-9);

        // step at ½ with μ = 0.3: mass 0.6 at ½ in every member
        let f0 = Distribution::binary(0.0, 1.0, 0.7).unwrap();
        let p = probe_argmax(&Payoff::step(0.5), &f0, &grid(21), None, 8, 3).unwrap();
        assert!((p.value - 0.6).abs() < 1e-12);
        for m in p.all_members() {
            assert!((m.mass_in(0.5, 0.5) - 0.6).abs() < 1e-9);
        }
    }

    #[test]
    fn probes_are_reproducible() {
        let u = Payoff::polynomial(vec![0.2, 0.5], Curvature::Affine);
        let a = probe_argmax(&u, &uniform(), &grid(21), None, 5, 11).unwrap();
        let b = probe_argmax(&u, &uniform(), &grid(21), None, 5, 11).unwrap();
        assert_eq!(a, b);
    }
}
