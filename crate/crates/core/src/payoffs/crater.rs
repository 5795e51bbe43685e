use serde::{Deserialize, Serialize};

use super::{Curvature, Payoff, PayoffError};

const DEFAULT_DENSITY: usize = 400;
const ABOVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CraterReason {
    EqualSlopes,
    CrossingOutside,
    CrossingAbove,
}

/// Concave `[x̄, y]`, strictly convex `[y, z]`, concave `[z, w̄]`, a tangent pair
/// at `x`, `w` and where the tangents cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CraterWitness {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    #[serde(rename = "X")]
    pub cross_x: f64,
    #[serde(rename = "Y")]
    pub cross_y: f64,
    pub reason: CraterReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraterVerdict {
    pub holds: bool,
    pub witness: Option<CraterWitness>,
    /// Number of concave–convex–concave patterns inspected.
    pub patterns: usize,
}

/// A concave–convex–concave pattern `(x̄, y, z, w̄)` read from the tags.
pub fn crater_patterns(u: &Payoff) -> Vec<(f64, f64, f64, f64)> {
    let r = u.regions();
    r.windows(3)
        .filter(|t| {
            t[0].curvature == Curvature::Concave
                && t[1].curvature == Curvature::Convex
                && t[2].curvature == Curvature::Concave
        })
        .map(|t| (t[0].from, t[1].from, t[1].to, t[2].to))
        .collect()
}

/// Tangent crossing for the pair `(x, w)`, or `None` for equal slopes.
pub fn tangent_crossing(u: &Payoff, x: f64, w: f64) -> Option<(f64, f64)> {
    let (ux, uw, dx, dw) = (u.value(x), u.value(w), u.slope(x), u.slope(w));
    if (dx - dw).abs() <= 1e-12 * (1.0 + dx.abs().max(dw.abs())) {
        return None;
    }
    let cross_x = (uw - ux + dx * x - dw * w) / (dx - dw);
    Some((cross_x, ux + dx * (cross_x - x)))
}

fn classify(u: &Payoff, x: f64, y: f64, z: f64, w: f64) -> Option<(CraterReason, f64, f64, f64)> {
    match tangent_crossing(u, x, w) {
        None => Some((CraterReason::EqualSlopes, f64::NAN, f64::NAN, f64::INFINITY)),
        Some((cx, cy)) => {
            if cx < y - 1e-10 || cx > z + 1e-10 {
                let out = (y - cx).max(cx - z);
                Some((CraterReason::CrossingOutside, cx, cy, out))
            } else {
                let above = cy - u.value(cx);
                (above > ABOVE_TOL).then_some((CraterReason::CrossingAbove, cx, cy, above))
            }
        }
    }
}

pub fn check_crater(u: &Payoff) -> Result<CraterVerdict, PayoffError> {
    check_crater_with(u, DEFAULT_DENSITY)
}

/// Scans every pattern on a `density × density` grid of tangent points and
/// returns the most severe violation, re-evaluated from the polynomials.
pub fn check_crater_with(u: &Payoff, density: usize) -> Result<CraterVerdict, PayoffError> {
    u.require_regular()?;
    let patterns = crater_patterns(u);
    let mut worst: Option<(f64, CraterWitness)> = None;
    for &(xb, y, z, wb) in &patterns {
        for i in 0..density {
            let x = xb + (y - xb) * i as f64 / density as f64;
            for j in 1..=density {
                let w = z + (wb - z) * j as f64 / density as f64;
                if let Some((reason, cx, cy, severity)) = classify(u, x, y, z, w) {
                    if worst.as_ref().is_none_or(|(s, _)| severity > *s) {
                        let wit = CraterWitness { x, y, z, w, cross_x: cx, cross_y: cy, reason };
                        worst = Some((severity, wit));
                    }
                }
            }
        }
    }
    let witness = worst.map(|(_, w)| w).filter(|w| reverify(u, w));
    Ok(CraterVerdict {
        holds: witness.is_none(),
        witness,
        patterns: patterns.len(),
    })
}

/// Recomputes the crossing from the tangent polynomials themselves.
fn reverify(u: &Payoff, w: &CraterWitness) -> bool {
    let (tx, tw) = match (u.tangent(w.x), u.tangent(w.w)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return false,
    };
    let diff = tx.sub(&tw);
    match w.reason {
        CraterReason::EqualSlopes => diff.degree() == 0 || diff.coeffs()[1].abs() <= 1e-12,
        _ => {
            if diff.degree() == 0 {
                return false;
            }
            let cx = -diff.coeffs()[0] / diff.coeffs()[1];
            let cy = tx.eval(cx);
            match w.reason {
                CraterReason::CrossingOutside => cx < w.y - 1e-10 || cx > w.z + 1e-10,
                _ => cx >= 0.0 && cx <= 1.0 && cy > u.value(cx) + ABOVE_TOL,
            }
        }
    }
}
