//! Named payoffs used by the tests, the acceptance run and the CLI.

use std::f64::consts::PI;

use crate::payoffs::{Curvature, Payoff};
use crate::poly::Poly;

/// Knots per unit interval for [`sin_fit`].
pub const SIN_FIT_KNOTS: usize = 24;

/// Cubic Hermite fit of `m ↦ sin(π(a + b m))` on a uniform knot set, with
/// the inflection points added as knots.
pub fn sin_fit(a: f64, b: f64) -> Payoff {
    let mut knots: Vec<f64> = (0..=SIN_FIT_KNOTS).map(|k| k as f64 / SIN_FIT_KNOTS as f64).collect();
    let first = a.floor() as i64 + 1;
    for k in first..=(a + b).ceil() as i64 {
        let m = (k as f64 - a) / b;
        if m > 1e-6 && m < 1.0 - 1e-6 {
            knots.push(m);
        }
    }
    Payoff::hermite_fit(|m| (PI * (a + b * m)).sin(), |m| PI * b * (PI * (a + b * m)).cos(), &knots)
        .expect("knots include 0 and 1")
}

/// The violating example: tangents at the outer concave pieces cross above
/// the convex valley.
pub fn sin_violation() -> Payoff {
    sin_fit(0.65, 1.75)
}

/// Same shape family, but the crater property holds.
pub fn sin_compliant() -> Payoff {
    sin_fit(0.85, 1.35)
}

/// `3m² − 2m³`: convex on `[0, ½]`, concave on `[½, 1]`.
pub fn s_shape() -> Payoff {
    Payoff::inferred(vec![0.0, 0.0, 3.0, -2.0])
}

/// `−t⁴ + 0.3t²` with `t = m − ½`, a shallow symmetric valley.
pub fn shallow_valley() -> Payoff {
    Payoff::polynomial(Poly::from_local(&[0.0, 0.0, 0.3, 0.0, -1.0], 0.5).coeffs().to_vec(), Curvature::Unclassified)
        .with_inferred_curvature()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::check_crater;

    #[test]
    fn sin_fits_match_their_figures() {
        let bad = sin_violation();
        assert!(bad.is_regular());
        assert!(!check_crater(&bad).unwrap().holds);
        let good = sin_compliant();
        assert!(good.is_regular());
        assert!(check_crater(&good).unwrap().holds);
        // fit error of the cubic interpolant
        let err = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .map(|m| (bad.value(m) - (PI * (0.65 + 1.75 * m)).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
}
