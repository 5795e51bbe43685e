use serde::{Deserialize, Serialize};

use super::Payoff;
use crate::measures::GridSpec;
use crate::poly::Poly;

pub const DEFAULT_OLC_GRID: usize = 201;

/// Anything that can be evaluated on `[0, 1]` and bounded above a line.
pub trait ScalarFn: Sync {
    fn value(&self, m: f64) -> f64;

    /// `max over [a, b] of f − line`. The default samples densely.
    fn max_above_line(&self, a: f64, b: f64, line: &Poly) -> f64 {
        let n = 4000;
        (0..=n)
            .map(|k| a + (b - a) * k as f64 / n as f64)
            .map(|x| self.value(x) - line.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl ScalarFn for Payoff {
    fn value(&self, m: f64) -> f64 {
        Payoff::value(self, m)
    }

    fn max_above_line(&self, a: f64, b: f64, line: &Poly) -> f64 {
        let inner = self.max_above(a, b, line).0;
        // endpoint values follow the u.s.c. convention
        inner.max(self.value(a) - line.eval(a)).max(self.value(b) - line.eval(b))
    }
}

/// A closure viewed as a payoff, for partners such as `exp ∘ u` that are not
/// piecewise polynomial.
pub struct FnPayoff<F: Fn(f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Sync> ScalarFn for FnPayoff<F> {
    fn value(&self, m: f64) -> f64 {
        (self.0)(m)
    }
}

/// A chord `[x, z]` and weight `α` at which the ordinal-convexity transfer
/// fails. With `strict` set, `u` is strictly below its chord at `x_α z` while
/// `v` is not; otherwise `v` is strictly above its chord.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordWitness {
    pub x: f64,
    pub z: f64,
    pub alpha: f64,
    pub strict: bool,
}

impl ChordWitness {
    /// `α x + (1 − α) z`.
    pub fn point(&self) -> f64 {
        self.alpha * self.x + (1.0 - self.alpha) * self.z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlcVerdict {
    pub holds: bool,
    pub witness: Option<ChordWitness>,
    /// Number of grid points the verdict was reached on.
    pub grid_size: usize,
}

fn scale_of(vals: &[f64]) -> f64 {
    1.0 + vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn chord_gap(vals: &[f64], xs: &[f64], i: usize, j: usize, k: usize) -> f64 {
    // positive when the chord lies above the function at x_j
    let t = (xs[j] - xs[i]) / (xs[k] - xs[i]);
    vals[i] + t * (vals[k] - vals[i]) - vals[j]
}

/// Decides "u is ordinally less convex than v" over all grid triples.
///
/// A `true` verdict is relative to the grid. A returned witness is re-checked:
/// the premise is verified on the whole chord, not just at grid points.
pub fn is_ordinally_less_convex(u: &dyn ScalarFn, v: &dyn ScalarFn, grid: &GridSpec) -> OlcVerdict {
    let xs = grid.points();
    let n = xs.len();
    let uv: Vec<f64> = xs.iter().map(|&x| u.value(x)).collect();
    let vv: Vec<f64> = xs.iter().map(|&x| v.value(x)).collect();
    // The premise and equality tests are tight; strictness and violations need
    // a clear margin, so rounding can only make the verdict more permissive.
    let (su, sv) = (scale_of(&uv), scale_of(&vv));
    let premise_tol = 1e-12 * su;
    let strict_u = 1e-9 * su;
    let equal_v = 1e-12 * sv;
    let above_v = 1e-9 * sv;

    let mut best: Option<(f64, ChordWitness)> = None;
    for i in 0..n {
        for k in i + 2..n {
            let premise = (i + 1..k).all(|j| chord_gap(&uv, xs, i, j, k) >= -premise_tol);
            if !premise {
                continue;
            }
            for j in i + 1..k {
                let gu = chord_gap(&uv, xs, i, j, k);
                let gv = chord_gap(&vv, xs, i, j, k);
                let alpha = (xs[k] - xs[j]) / (xs[k] - xs[i]);
                let found = if gv < -above_v {
                    Some((-gv / sv + 1.0, false))
                } else if gu > strict_u && gv <= equal_v {
                    Some((gu / su, true))
                } else {
                    None
                };
                if let Some((margin, strict)) = found {
                    let w = ChordWitness { x: xs[i], z: xs[k], alpha, strict };
                    if best.as_ref().is_none_or(|(m, _)| margin > *m) && verify_witness(u, v, &w) {
                        best = Some((margin, w));
                    }
                }
            }
        }
    }
    OlcVerdict {
        holds: best.is_none(),
        witness: best.map(|(_, w)| w),
        grid_size: n,
    }
}

/// Re-checks a witness on the whole chord `[x, z]`.
pub fn verify_witness(u: &dyn ScalarFn, v: &dyn ScalarFn, w: &ChordWitness) -> bool {
    let (x, z) = (w.x, w.z);
    if !(x < z && w.alpha > 0.0 && w.alpha < 1.0) {
        return false;
    }
    let chord = |f: &dyn ScalarFn| {
        let (fx, fz) = (f.value(x), f.value(z));
        let s = (fz - fx) / (z - x);
        Poly::linear(fx - s * x, s)
    };
    let (cu, cv) = (chord(u), chord(v));
    let su = 1.0 + u.value(x).abs().max(u.value(z).abs());
    let sv = 1.0 + v.value(x).abs().max(v.value(z).abs());
    if u.max_above_line(x, z, &cu) > 1e-10 * su {
        return false;
    }
    let m = w.point();
    let gu = cu.eval(m) - u.value(m);
    let gv = cv.eval(m) - v.value(m);
    if w.strict {
        gu > 0.0 && gv <= 1e-12 * sv
    } else {
        gv < 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::Curvature;

    fn grid() -> GridSpec {
        GridSpec::uniform(41).unwrap()
    }

    #[test]
    fn affine_below_convex() {
        let u = Payoff::polynomial(vec![0.0, 1.0], Curvature::Affine);
        let v = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        assert!(is_ordinally_less_convex(&u, &v, &grid()).holds);
        let r = is_ordinally_less_convex(&v, &u, &grid());
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!(w.strict);
        assert!(verify_witness(&v, &u, &w));
    }

    #[test]
    fn weak_failure_is_reported() {
        let u = Payoff::polynomial(vec![0.0, 0.0, 1.0], Curvature::Convex);
        let v = Payoff::inferred(vec![0.0, 0.0, -1.0]);
        let w = is_ordinally_less_convex(&u, &v, &grid()).witness.unwrap();
        assert!(!w.strict);
    }

    #[test]
    fn exponential_partner() {
        let u = Payoff::inferred(vec![0.2, 1.0, -3.0, 2.5]);
        let uu = u.clone();
        let v = FnPayoff(move |m| (2.0 * uu.value(m)).exp());
        assert!(is_ordinally_less_convex(&u, &v, &grid()).holds);
        assert!(is_ordinally_less_convex(&u, &u, &grid()).holds);
    }
}
