use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::measures::{less_informative, Distribution, ORDER_TOL};
use crate::payoffs::{concave_envelope, Payoff};

const ENVELOPE_REFINEMENT: usize = 1000;
/// Slack allowed in the comparisons of [`prop1_check`].
pub const PROP1_TOL: f64 = 1e-7;

/// Closed-form solution for a two-point prior with mean `μ`.
///
/// `[x, w]` is the maximal interval containing `μ` on which `cav u` is
/// affine, `y ≤ μ ≤ z` the nearest contact points, `least` the two-point law
/// on `{y, z}` and `most` the one on `{x, w}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySolution {
    pub mu: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    /// contact set `{u = cav u}` restricted to `[x, w]`
    pub contact: Vec<(f64, f64)>,
    pub least: Distribution,
    pub most: Distribution,
    pub value: f64,
}

pub fn binary_solve(u: &Payoff, mu: f64) -> Result<BinarySolution, ConstructionError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(ConstructionError::Domain(mu));
    }
    let env = concave_envelope(u, ENVELOPE_REFINEMENT);
    let value = env.eval(mu);
    let (x, w) = env.affine_interval(mu);
    let contact: Vec<(f64, f64)> = env
        .contact_set()
        .iter()
        .filter(|&&(a, b)| b >= x && a <= w)
        .map(|&(a, b)| (a.max(x), b.min(w)))
        .collect();
    let (y, z) = if x == w || env.touches(mu) {
        (mu, mu)
    } else {
        // the line endpoints are contact points by upper semicontinuity
        let y = contact.iter().filter(|c| c.0 <= mu).map(|c| c.1.min(mu)).fold(x, f64::max);
        let z = contact.iter().filter(|c| c.1 >= mu).map(|c| c.0.max(mu)).fold(w, f64::min);
        (y, z)
    };
    Ok(BinarySolution {
        mu,
        x,
        y,
        z,
        w,
        contact,
        least: Distribution::two_point_with_mean(y, z, mu)?,
        most: Distribution::two_point_with_mean(x, w, mu)?,
        value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Failure {
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub pass: bool,
    pub failures: Vec<Prop1Failure>,
    pub for_u: BinarySolution,
    pub for_v: BinarySolution,
}

/// Compares the binary-prior solutions of `u` and `v` at `μ`: the interval
/// and contact points for `v` must bracket those for `u`.
pub fn prop1_check(u: &Payoff, v: &Payoff, mu: f64) -> Result<Prop1Report, ConstructionError> {
    let su = binary_solve(u, mu)?;
    let sv = binary_solve(v, mu)?;
    let mut failures = Vec::new();
    let mut need = |name: &str, lhs: f64, rhs: f64| {
        if lhs > rhs + PROP1_TOL {
            failures.push(Prop1Failure { inequality: name.into(), lhs, rhs });
        }
    };
    need("x' <= x", sv.x, su.x);
    need("w <= w'", su.w, sv.w);
    need("y' <= y", sv.y, su.y);
    need("z <= z'", su.z, sv.z);
    Ok(Prop1Report { pass: failures.is_empty(), failures, for_u: su, for_v: sv })
}

impl BinarySolution {
    /// `least ⪯ most` and both attain the envelope value within `tol`.
    pub fn consistent(&self, u: &Payoff, tol: f64) -> bool {
        let ok_value = |d: &Distribution| (u.expectation(d) - self.value).abs() <= tol;
        ok_value(&self.least) && ok_value(&self.most) && less_informative(&self.least, &self.most, ORDER_TOL).holds()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::Curvature;

    fn atoms(d: &Distribution) -> Vec<(f64, f64)> {
        d.atoms().iter().map(|a| (a.x, a.w)).collect()
    }

    #[test]
    fn strictly_concave_pools() {
        let u = Payoff::polynomial(vec![0.0, 1.0, -1.0], Curvature::Concave);
        let s = binary_solve(&u, 0.4).unwrap();
        assert_eq!((s.x, s.y, s.z, s.w), (0.4, 0.4, 0.4, 0.4));
        assert_eq!(atoms(&s.least), vec![(0.4, 1.0)]);
        assert!((s.value - 0.24).abs() < 1e-12);
    }

    #[test]
    fn strictly_convex_reveals() {
        let u = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let s = binary_solve(&u, 0.4).unwrap();
        assert!(s.x.abs() < 1e-9 && (s.w - 1.0).abs() < 1e-9);
        assert!(s.y.abs() < 1e-9 && (s.z - 1.0).abs() < 1e-9);
        let a = atoms(&s.most);
        assert!((a[0].1 - 0.6).abs() < 1e-9 && (a[1].1 - 0.4).abs() < 1e-9);
        assert!(s.consistent(&u, 1e-9));
    }

    #[test]
    fn step_payoff() {
        let u = Payoff::step(0.5);
        let s = binary_solve(&u, 0.3).unwrap();
        assert!((s.value - 0.6).abs() < 1e-9);
        assert!(s.x.abs() < 1e-9 && (s.w - 0.5).abs() < 1e-9);
        assert!(s.y.abs() < 1e-9 && (s.z - 0.5).abs() < 1e-9);
        let a = atoms(&s.least);
        assert!((a[0].0 - 0.0).abs() < 1e-9 && (a[0].1 - 0.4).abs() < 1e-9);
        assert!((a[1].0 - 0.5).abs() < 1e-9 && (a[1].1 - 0.6).abs() < 1e-9);
        assert!(s.consistent(&u, 1e-9));
    }

    #[test]
    fn rejects_boundary_means() {
        let u = Payoff::step(0.5);
        assert!(matches!(binary_solve(&u, 0.0), Err(ConstructionError::Domain(_))));
        assert!(matches!(binary_solve(&u, 1.5), Err(ConstructionError::Domain(_))));
    }

    #[test]
    fn prop1_examples() {
        let u = Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0]);
        let same = prop1_check(&u, &u, 0.3).unwrap();
        assert!(same.pass);
        assert_eq!(same.for_u, same.for_v);

        let cave = Payoff::polynomial(vec![0.0, 1.0, -1.0], Curvature::Concave);
        let vex = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let r = prop1_check(&cave, &vex, 0.5).unwrap();
        assert!(r.pass);
        assert_eq!(atoms(&r.for_u.most), vec![(0.5, 1.0)]);
        assert!((r.for_v.x, r.for_v.w) == (0.0, 1.0) || (r.for_v.w - 1.0).abs() < 1e-9);
        // swapped roles fail every inequality
        let bad = prop1_check(&vex, &cave, 0.5).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.failures.len(), 4);
    }
}
