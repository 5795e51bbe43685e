//! Interval dominance between `F ⪯ H`, weak-set-order comparison of argmax
//! probes, and the pooling/spreading maps that move an optimizer within its
//! argmax set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{
    convex_envelope, less_informative, Distribution, IntegratedCdf, MeasureError, Order, PiecewiseQuadratic, QuadPiece,
    ORDER_TOL,
};
use crate::payoffs::{restricted_convex_envelope, Payoff, PayoffError, PointSet};
use crate::solver::{solve_values, ArgmaxProbe, SolveError};
use crate::GridSpec;

/// Tolerance on `C_H − C_F` when deciding where the two touch.
pub const FAMILY_TOL: f64 = 1e-10;
/// Tolerance on `u − Φ` in the interval-dominance criterion.
pub const DOMINANCE_TOL: f64 = 1e-8;
/// Relative tolerance for "attains the optimal value" in set comparisons.
pub const ATTAIN_TOL: f64 = 1e-8;
const HULL_DENSITY: usize = 2000;
const ENDPOINT_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("not comparable: C_F exceeds C_H by {excess:e} at {x}")]
    NotComparable { x: f64, excess: f64 },
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

fn require_less(f: &Distribution, h: &Distribution) -> Result<(), OrderError> {
    match less_informative(f, h, ORDER_TOL) {
        Order::Less => Ok(()),
        Order::NotLess { x, excess } => Err(OrderError::NotComparable { x, excess }),
    }
}

/// Maximal closed intervals on whose interior `C_F < C_H`, with equality at
/// both ends.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    pub intervals: Vec<(f64, f64)>,
}

impl IntervalFamily {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// The member containing `x`, if any.
    pub fn member_containing(&self, x: f64) -> Option<(f64, f64)> {
        self.intervals.iter().copied().find(|&(a, b)| x >= a && x <= b)
    }
}

pub fn interval_family(f: &Distribution, h: &Distribution) -> Result<IntervalFamily, OrderError> {
    require_less(f, h)?;
    Ok(positive_runs(f.integrated_cdf().as_piecewise(), h.integrated_cdf().as_piecewise(), FAMILY_TOL))
}

/// Maximal intervals where `h − f > tol`, found from the roots and vertices of
/// each quadratic piece of the difference.
pub(crate) fn positive_runs(f: &PiecewiseQuadratic, h: &PiecewiseQuadratic, tol: f64) -> IntervalFamily {
    let mut pts: Vec<(f64, QuadPiece)> = Vec::new();
    let cells = f.align(h);
    let mut marks: Vec<f64> = Vec::new();
    for (a, b, pf, ph) in &cells {
        let d = ph.sub(pf);
        marks.push(*a);
        marks.extend(d.roots_inside(*a, *b));
        if d.c2 != 0.0 {
            let v = -d.c1 / (2.0 * d.c2);
            if v > *a && v < *b {
                marks.push(v);
            }
        }
        pts.push((*b, d));
    }
    if let Some((_, b, _, _)) = cells.last() {
        marks.push(*b);
    }
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    let diff_at = |x: f64| {
        let k = pts.partition_point(|(b, _)| *b < x).min(pts.len() - 1);
        pts[k].1.eval(x)
    };
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for w in marks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let positive = b > a && diff_at(0.5 * (a + b)) > tol;
        let touches_a = diff_at(a) <= tol;
        match (open, positive) {
            (Some(start), true) if touches_a => {
                out.push((start, a));
                open = Some(a);
            }
            (None, true) => open = Some(a),
            (Some(start), false) => {
                out.push((start, a));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(start), Some(&end)) = (open, marks.last()) {
        out.push((start, end));
    }
    IntervalFamily { intervals: out }
}

/// Where the interval-dominance criterion fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceWitness {
    pub interval: (f64, f64),
    pub at: f64,
    /// `u − Φ` at `at`
    pub shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub holds: bool,
    pub witness: Option<DominanceWitness>,
    pub family: IntervalFamily,
}

/// Does `∫u dG ≤ ∫u dH` hold for every `G` in `[F, H]`? Decided through the
/// convex envelope of `u` over `supp(H) ∩ I` on each member `I` of the
/// interval family.
pub fn interval_dominance_check(u: &Payoff, f: &Distribution, h: &Distribution) -> Result<DominanceVerdict, OrderError> {
    let family = interval_family(f, h)?;
    let support = h.support();
    let mut worst: Option<DominanceWitness> = None;
    for &(a, b) in &family.intervals {
        let mut set = PointSet::default();
        for &(lo, hi) in &support {
            // endpoints come from root finding and may miss an atom by an ulp
            let (lo, hi) = (lo.max(a - ENDPOINT_SLACK), hi.min(b + ENDPOINT_SLACK));
            if hi < lo {
                continue;
            }
            if hi - lo <= 1e-15 {
                set.points.push(lo);
            } else {
                set.intervals.push((lo, hi));
            }
        }
        if set.is_empty() {
            continue;
        }
        let phi = restricted_convex_envelope(u, &set, HULL_DENSITY)?;
        let (gap, at) = phi.max_shortfall(u, a, b);
        let scale = 1.0 + u.value(at).abs();
        if gap > DOMINANCE_TOL * scale && worst.is_none_or(|w| gap > w.shortfall) {
            worst = Some(DominanceWitness { interval: (a, b), at, shortfall: gap });
        }
    }
    Ok(DominanceVerdict { holds: worst.is_none(), witness: worst, family })
}

/// A probe member for which the required partner could not be found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsoWitness {
    /// `"u"` or `"v"`: which probe the member came from
    pub probe: String,
    pub member: usize,
    /// `"dominating"` or `"dominated"`: the partner that is missing
    pub missing: String,
    /// best value reachable by such a partner, against the optimum
    pub attained: f64,
    pub optimum: f64,
}

/// Weak-set-order relation between two sampled argmax sets.
///
/// The universal quantifiers range over the probe members only; each
/// existence check is an exact interval-constrained solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsoVerdict {
    /// u-argmax lower than v-argmax
    pub lower: bool,
    pub strictly_lower: bool,
    /// v-argmax lower than u-argmax
    pub higher: bool,
    pub strictly_higher: bool,
    pub witnesses: Vec<WsoWitness>,
    pub value_u: f64,
    pub value_v: f64,
    /// sampled members per probe; the verdict is relative to these samples
    pub members: (usize, usize),
}

fn attains(value: f64, optimum: f64) -> bool {
    value >= optimum - ATTAIN_TOL * (1.0 + optimum.abs())
}

/// Checks one direction: is the argmax of probe `a` lower than that of `b`?
fn lower_than(a: &ArgmaxProbe, b: &ArgmaxProbe, names: (&str, &str), f0: &Distribution, grid: &GridSpec) -> Result<Vec<WsoWitness>, OrderError> {
    let ma: Vec<&Distribution> = a.all_members().collect();
    let mb: Vec<&Distribution> = b.all_members().collect();
    // every member of a needs a b-optimizer above it: max over [F, F0]
    let up = ma
        .par_iter()
        .map(|m| solve_values(&b.payoff, f0, grid, Some(m)).map(|r| r.value))
        .collect::<Result<Vec<f64>, _>>()?;
    // every member of b needs an a-optimizer below it: max over [G0, G],
    // with G0 = δ_μ when the probe has no lower bound
    let down = mb
        .par_iter()
        .map(|m| solve_values(&a.payoff, m, grid, a.lower.as_ref()).map(|r| r.value))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut out = Vec::new();
    for (i, v) in up.into_iter().enumerate() {
        if !attains(v, b.value) {
            out.push(WsoWitness { probe: names.0.into(), member: i, missing: "dominating".into(), attained: v, optimum: b.value });
        }
    }
    for (i, v) in down.into_iter().enumerate() {
        if !attains(v, a.value) {
            out.push(WsoWitness { probe: names.1.into(), member: i, missing: "dominated".into(), attained: v, optimum: a.value });
        }
    }
    Ok(out)
}

/// Compares the u-probe with the v-probe in both directions. Both probes must
/// come from the same prior and grid; their payoff vectors are taken from
/// the probes themselves.
pub fn wso_compare(pu: &ArgmaxProbe, pv: &ArgmaxProbe, f0: &Distribution, grid: &GridSpec) -> Result<WsoVerdict, OrderError> {
    let forward = lower_than(pu, pv, ("u", "v"), f0, grid)?;
    let backward = lower_than(pv, pu, ("v", "u"), f0, grid)?;
    let (lower, higher) = (forward.is_empty(), backward.is_empty());
    let mut witnesses = forward;
    witnesses.extend(backward);
    Ok(WsoVerdict {
        lower,
        strictly_lower: lower && !higher,
        higher,
        strictly_higher: higher && !lower,
        witnesses,
        value_u: pu.value,
        value_v: pv.value,
        members: (pu.all_members().count(), pv.all_members().count()),
    })
}

/// Pools `G` over each maximal concavity interval of `u`.
pub fn pool_concave(g: &Distribution, u: &Payoff) -> Result<Distribution, OrderError> {
    u.require_regular()?;
    let intervals: Vec<(f64, f64)> = u.concavity_intervals().into_iter().filter(|(a, b)| b > a).collect();
    Ok(g.pool_intervals(&intervals)?)
}

/// Spreads `H` as far towards `F0` as possible on each maximal convexity
/// interval of `v`: the distribution whose integrated CDF is the convex
/// envelope of `C_F0` on those intervals and `C_H` elsewhere.
pub fn spread_convex(h: &Distribution, v: &Payoff, f0: &Distribution) -> Result<Distribution, OrderError> {
    v.require_regular()?;
    require_less(h, f0)?;
    let convex: Vec<(f64, f64)> = v.convexity_intervals().into_iter().filter(|(a, b)| b > a).collect();
    if convex.is_empty() {
        return Ok(h.clone());
    }
    let cf0 = f0.integrated_cdf();
    let ch = h.integrated_cdf();
    let inside = |x: f64| convex.iter().any(|&(a, b)| x >= a && x <= b);
    let mut knots = Vec::new();
    let mut pieces = Vec::new();
    for (a, b, p0, ph) in cf0.as_piecewise().align(ch.as_piecewise()) {
        let mut cuts = vec![a];
        cuts.extend(convex.iter().flat_map(|&(l, r)| [l, r]).filter(|&c| c > a && c < b));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(b);
        for w in cuts.windows(2) {
            knots.push(w[0]);
            pieces.push(if inside(0.5 * (w[0] + w[1])) { p0 } else { ph });
        }
    }
    knots.push(1.0);
    let env = convex_envelope(&PiecewiseQuadratic::new(knots, pieces));
    Ok(IntegratedCdf::from_piecewise(env).to_distribution()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Atom;
    use crate::payoffs::Curvature;

    fn atoms(pairs: &[(f64, f64)]) -> Distribution {
        Distribution::new(pairs.iter().map(|&(x, w)| Atom { x, w }).collect(), vec![]).unwrap()
    }

    #[test]
    fn family_examples() {
        let h = atoms(&[(0.0, 0.25), (0.5, 0.5), (1.0, 0.25)]);
        assert!(interval_family(&h, &h).unwrap().is_empty());

        let half = Distribution::point_mass(0.5).unwrap();
        let fam = interval_family(&half, &atoms(&[(0.0, 0.5), (1.0, 0.5)])).unwrap();
        assert_eq!(fam.intervals, vec![(0.0, 1.0)]);

        let f = atoms(&[(0.25, 0.5), (0.75, 0.5)]);
        let fam = interval_family(&f, &h).unwrap();
        assert_eq!(fam.intervals, vec![(0.0, 0.5), (0.5, 1.0)]);

        assert!(matches!(interval_family(&h, &f), Err(OrderError::NotComparable { .. })));
    }

    #[test]
    fn family_split_at_tangential_touch() {
        // C_H − C_F = (x − ½)²/2 near ½: touches zero inside a single piece
        let h = Distribution::uniform(0.0, 1.0).unwrap();
        let f = atoms(&[(0.25, 0.5), (0.75, 0.5)]);
        let fam = interval_family(&f, &h).unwrap();
        assert_eq!(fam.intervals.len(), 2);
        assert!((fam.intervals[0].1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dominance_examples() {
        let h = atoms(&[(0.0, 0.5), (1.0, 0.5)]);
        let f = Distribution::point_mass(0.5).unwrap();
        let convex = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        assert!(interval_dominance_check(&convex, &f, &h).unwrap().holds);
        let concave = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        let v = interval_dominance_check(&concave, &f, &h).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        assert!((w.at - 0.5).abs() < 1e-9 && (w.shortfall - 0.25).abs() < 1e-9);
    }

    #[test]
    fn pooling_examples() {
        let g = Distribution::uniform(0.0, 1.0).unwrap();
        let concave = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        assert_eq!(pool_concave(&g, &concave).unwrap(), Distribution::point_mass(0.5).unwrap());
        let convex = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        assert!(pool_concave(&g, &convex).unwrap().distance(&g) < 1e-15);
        let s = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let p = pool_concave(&g, &s).unwrap();
        assert!((p.mass_in(0.75, 0.75) - 0.5).abs() < 1e-12);
        assert!((p.mass_in(0.0, 0.5) - 0.5).abs() < 1e-12);
        assert!(!p.is_atomless() && p.uniforms().len() == 1);
    }

    #[test]
    fn spreading_examples() {
        let f0 = Distribution::uniform(0.0, 1.0).unwrap();
        let half = Distribution::point_mass(0.5).unwrap();
        let convex = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        assert!(spread_convex(&half, &convex, &f0).unwrap().distance(&f0) < 1e-12);
        let concave = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        assert_eq!(spread_convex(&half, &concave, &f0).unwrap(), half);

        // convex on [0, ½]: an atom on the boundary of the convexity interval
        // cannot be spread without moving the mean
        let s = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        assert!(spread_convex(&half, &s, &f0).unwrap().distance(&half) < 1e-12);

        // H = ½δ_¼ + ½δ_¾: C_F0 = x²/2 on [0, ½] meets C_H with equal slope at
        // ½, so the envelope reveals [0, ½] and keeps the atom at ¾
        let h = atoms(&[(0.25, 0.5), (0.75, 0.5)]);
        let r = spread_convex(&h, &s, &f0).unwrap();
        assert!(less_informative(&h, &r, 1e-12).holds());
        assert!(less_informative(&r, &f0, 1e-12).holds());
        let expected = f0.upper_censorship(0.5).unwrap();
        assert!(r.distance(&expected) < 1e-9, "{r:?}");
        assert!(s.expectation(&r) >= s.expectation(&h) - 1e-12);
    }

    #[test]
    fn wso_examples() {
        use crate::solver::probe_argmax;
        let f0 = Distribution::uniform(0.0, 1.0).unwrap();
        let grid = GridSpec::uniform(21).unwrap();
        let s = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let p = probe_argmax(&s, &f0, &grid, None, 3, 1).unwrap();
        let v = wso_compare(&p, &p, &f0, &grid).unwrap();
        assert!(v.lower && v.higher && !v.strictly_lower && !v.strictly_higher);

        let concave = Payoff::inferred(vec![0.0, 1.0, -1.0]);
        let convex = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let pu = probe_argmax(&concave, &f0, &grid, None, 3, 1).unwrap();
        let pv = probe_argmax(&convex, &f0, &grid, None, 3, 1).unwrap();
        let v = wso_compare(&pu, &pv, &f0, &grid).unwrap();
        assert!(v.lower && v.strictly_lower && !v.higher);
        assert!(!v.witnesses.is_empty());
        let r = wso_compare(&pv, &pu, &f0, &grid).unwrap();
        assert!(r.strictly_higher);
    }
}
