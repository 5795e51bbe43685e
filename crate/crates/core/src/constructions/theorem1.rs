use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::measures::{Distribution, GridSpec};
use crate::orders::{wso_compare, WsoVerdict};
use crate::payoffs::{verify_witness, ChordWitness, ScalarFn};
use crate::solver::{probe_values, solve_values};

/// Members sampled from each argmax when checking the verdict.
const PROBE_SIZE: usize = 8;
const ARGMAX_TOL: f64 = 1e-8;
/// Samples used to locate the concave envelope of `v` on the chord.
const HULL_SAMPLES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChordCase {
    /// `v` lies weakly below its chord at the witness point
    Case1,
    /// `v` lies strictly above its chord somewhere
    Case2,
}

/// LP-checked membership facts behind the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxFacts {
    pub value_u: f64,
    pub value_v: f64,
    /// `∫u dF0` and `u(μ)`
    pub prior_u: f64,
    pub pooled_u: f64,
    /// `∫v dF0` and `v(μ)`
    pub prior_v: f64,
    pub pooled_v: f64,
    pub prior_in_u_argmax: bool,
    pub pooled_in_v_argmax: bool,
    pub pooled_in_u_argmax: bool,
    pub prior_in_v_argmax: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Counterexample {
    pub prior: Distribution,
    pub case: ChordCase,
    pub witness: ChordWitness,
    /// weight on `x` (the witness `α` in the first case)
    pub beta: f64,
    pub mean: f64,
    pub grid: GridSpec,
    pub facts: ArgmaxFacts,
    pub verdict: WsoVerdict,
}

/// The upper hull vertex of `v` on `[x, z]` furthest above the chord.
fn hull_peak(v: &dyn ScalarFn, x: f64, z: f64) -> f64 {
    let (vx, vz) = (v.value(x), v.value(z));
    let above = |m: f64| v.value(m) - (vx + (vz - vx) * (m - x) / (z - x));
    let n = HULL_SAMPLES;
    let best = (1..n)
        .map(|k| x + (z - x) * k as f64 / n as f64)
        .max_by(|a, b| above(*a).total_cmp(&above(*b)))
        .expect("interior samples");
    // refine within the neighbouring cells
    let h = (z - x) / n as f64;
    let (mut lo, mut hi) = ((best - h).max(x), (best + h).min(z));
    for _ in 0..100 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if above(m1) < above(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let refined = 0.5 * (lo + hi);
    if above(refined) >= above(best) {
        refined
    } else {
        best
    }
}

/// Builds the two-point prior on which the argmax for `u` is strictly
/// higher than the argmax for `v`, and checks that on `grid`.
pub fn theorem1_counterexample(
    u: &dyn ScalarFn,
    v: &dyn ScalarFn,
    witness: &ChordWitness,
    grid: &GridSpec,
) -> Result<Theorem1Counterexample, ConstructionError> {
    if !verify_witness(u, v, witness) {
        return Err(ConstructionError::InvalidWitness);
    }
    let (x, z) = (witness.x, witness.z);
    let (case, beta) = if witness.strict {
        (ChordCase::Case1, witness.alpha)
    } else {
        let m = hull_peak(v, x, z);
        (ChordCase::Case2, (z - m) / (z - x))
    };
    let prior = Distribution::binary(x, z, beta)?;
    let mean = prior.mean();
    let grid = grid.refined_with(&[x, z, mean]);
    let uv: Vec<f64> = grid.points().iter().map(|&m| u.value(m)).collect();
    let vv: Vec<f64> = grid.points().iter().map(|&m| v.value(m)).collect();

    let (ru, rv) = rayon::join(|| solve_values(&uv, &prior, &grid, None), || solve_values(&vv, &prior, &grid, None));
    let (value_u, value_v) = (ru?.value, rv?.value);
    let prior_u = beta * u.value(x) + (1.0 - beta) * u.value(z);
    let prior_v = beta * v.value(x) + (1.0 - beta) * v.value(z);
    let (pooled_u, pooled_v) = (u.value(mean), v.value(mean));
    let attains = |val: f64, opt: f64| val >= opt - ARGMAX_TOL * (1.0 + opt.abs());
    let facts = ArgmaxFacts {
        value_u,
        value_v,
        prior_u,
        pooled_u,
        prior_v,
        pooled_v,
        prior_in_u_argmax: attains(prior_u, value_u),
        pooled_in_v_argmax: attains(pooled_v, value_v),
        pooled_in_u_argmax: attains(pooled_u, value_u),
        prior_in_v_argmax: attains(prior_v, value_v),
    };

    let (pu, pv) = rayon::join(
        || probe_values(&uv, &prior, &grid, None, PROBE_SIZE, 0),
        || probe_values(&vv, &prior, &grid, None, PROBE_SIZE, 1),
    );
    let verdict = wso_compare(&pu?, &pv?, &prior, &grid)?;
    Ok(Theorem1Counterexample { prior, case, witness: *witness, beta, mean, grid, facts, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{Curvature, Payoff};

    fn grid() -> GridSpec {
        GridSpec::uniform(21).unwrap()
    }

    #[test]
    fn convex_against_affine() {
        let u = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let v = Payoff::polynomial(vec![0.0, 1.0], Curvature::Affine);
        let w = ChordWitness { x: 0.0, z: 1.0, alpha: 0.5, strict: true };
        let cx = theorem1_counterexample(&u, &v, &w, &grid()).unwrap();
        assert_eq!(cx.case, ChordCase::Case1);
        assert_eq!(cx.prior.atoms().len(), 2);
        assert!((cx.prior.atoms()[0].w - 0.5).abs() < 1e-15);
        let f = &cx.facts;
        assert!(f.prior_in_u_argmax && f.pooled_in_v_argmax && f.prior_in_v_argmax);
        assert!(!f.pooled_in_u_argmax);
        assert!(cx.verdict.strictly_higher, "{:?}", cx.verdict);
    }

    #[test]
    fn convex_against_concave() {
        let u = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let v = Payoff::polynomial(vec![0.0, 0.0, -1.0], Curvature::Concave);
        let w = ChordWitness { x: 0.2, z: 0.9, alpha: 0.3, strict: false };
        let cx = theorem1_counterexample(&u, &v, &w, &grid()).unwrap();
        assert_eq!(cx.case, ChordCase::Case2);
        // the peak of −m² above its chord on [0.2, 0.9] is the midpoint
        assert!((cx.mean - 0.55).abs() < 1e-6, "{}", cx.mean);
        let f = &cx.facts;
        assert!(f.prior_in_u_argmax && f.pooled_in_v_argmax);
        assert!(!f.pooled_in_u_argmax && !f.prior_in_v_argmax);
        assert!(cx.verdict.strictly_higher);
    }

    #[test]
    fn rejects_bad_witness() {
        let u = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let w = ChordWitness { x: 0.0, z: 1.0, alpha: 0.5, strict: true };
        assert!(matches!(theorem1_counterexample(&u, &u, &w, &grid()), Err(ConstructionError::InvalidWitness)));
    }
}
