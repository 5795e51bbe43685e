use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measures::{Atom, Distribution, Uniform};
use crate::payoffs::{check_crater, Curvature, Payoff, Segment};
use crate::poly::Poly;

/// Curvature pattern of a generated payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffFamily {
    Convex,
    Concave,
    SShape,
    /// concave–convex–concave satisfying the crater property
    Crater,
    /// concave–convex–concave violating it
    Violating,
    /// `segments` pieces with random curvature signs
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "count", rename_all = "kebab-case")]
pub enum PriorFamily {
    Atoms(usize),
    Uniforms(usize),
}

/// How an ordinally more convex partner is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartnerRoute {
    /// `φ ∘ u` with `φ(t) = t + c(t − min u)²`
    Compose,
    /// `u + c(m − m₀)²`
    AddConvex,
}

const MIN_PIECE: f64 = 0.08;
const REJECTION_TRIES: usize = 200;

fn breakpoints(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let inner = count.saturating_sub(1);
    // spacings with a floor, rescaled to tile [0, 1]
    let raw: Vec<f64> = (0..=inner).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - MIN_PIECE * (inner + 1) as f64;
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for r in &raw[..inner] {
        acc += MIN_PIECE + free * r / total;
        out.push(acc);
    }
    out.push(1.0);
    out
}

/// C¹ cubic spline whose second derivative on piece `k` is linear with the
/// sign `signs[k]` (0 for affine) and magnitude drawn from `strength[k]`.
fn spline(rng: &mut ChaCha8Rng, signs: &[i8], strength: &[(f64, f64)], knots: &[f64]) -> Payoff {
    let mut c0 = rng.gen_range(-0.5..0.5);
    let mut c1 = rng.gen_range(-1.0..1.0);
    let mut segs = Vec::with_capacity(signs.len());
    for (k, &s) in signs.iter().enumerate() {
        let (a, b) = (knots[k], knots[k + 1]);
        let h = b - a;
        let (lo, hi) = strength[k];
        let (alpha, beta) = if s == 0 {
            (0.0, 0.0)
        } else {
            let sg = f64::from(s);
            (sg * rng.gen_range(lo..hi), sg * rng.gen_range(lo..hi))
        };
        let local = [c0, c1, 0.5 * alpha, (beta - alpha) / (6.0 * h)];
        let p = Poly::from_local(&local, a);
        let tag = match s {
            1 => Curvature::Convex,
            -1 => Curvature::Concave,
            _ => Curvature::Affine,
        };
        c0 = p.eval(b);
        c1 = p.derivative().eval(b);
        segs.push(Segment::new(a, b, p, tag));
    }
    Payoff::new(segs).expect("generated pieces tile [0, 1]")
}

fn with_signs(rng: &mut ChaCha8Rng, signs: &[i8], strength: &[(f64, f64)]) -> Payoff {
    let knots = breakpoints(rng, signs.len());
    spline(rng, signs, strength, &knots)
}

/// A regular payoff of the given family. Crater families are rejection
/// sampled; after too many rejections an S-shape is returned, which satisfies
/// the crater property trivially.
pub fn gen_payoff(rng: &mut ChaCha8Rng, family: PayoffFamily, segments: usize) -> Payoff {
    let normal = (0.5, 4.0);
    match family {
        PayoffFamily::Convex => with_signs(rng, &[1], &[normal]),
        PayoffFamily::Concave => with_signs(rng, &[-1], &[normal]),
        PayoffFamily::SShape => with_signs(rng, &[1, -1], &[normal, normal]),
        PayoffFamily::Random => {
            let n = segments.max(1);
            let signs: Vec<i8> = (0..n)
                .map(|_| match rng.gen_range(0..10) {
                    0 => 0,
                    1..=4 => 1,
                    _ => -1,
                })
                .collect();
            with_signs(rng, &signs, &vec![normal; n])
        }
        PayoffFamily::Crater | PayoffFamily::Violating => {
            let want = family == PayoffFamily::Crater;
            // a deep convex valley tends to satisfy the property, a shallow one not
            let middle = if want { (6.0, 16.0) } else { (0.3, 2.0) };
            let sides = if want { (0.5, 3.0) } else { (2.0, 8.0) };
            for _ in 0..REJECTION_TRIES {
                let u = with_signs(rng, &[-1, 1, -1], &[sides, middle, sides]);
                if check_crater(&u).is_ok_and(|v| v.holds == want) {
                    return u;
                }
            }
            if want {
                with_signs(rng, &[1, -1], &[normal, normal])
            } else {
                // a symmetric shallow valley always violates
                crate::harness::fixtures::shallow_valley()
            }
        }
    }
}

/// `[lo, hi] ⊆ [0, 1]` and an atom or uniform-piece layout inside it.
pub fn gen_prior(rng: &mut ChaCha8Rng, family: PriorFamily) -> Distribution {
    match family {
        PriorFamily::Atoms(k) => {
            let k = k.max(1);
            let atoms: Vec<Atom> = (0..k).map(|_| Atom { x: rng.gen_range(0.02..0.98), w: rng.gen_range(0.2..1.0) }).collect();
            let total: f64 = atoms.iter().map(|a| a.w).sum();
            let atoms = atoms.into_iter().map(|a| Atom { x: a.x, w: a.w / total }).collect();
            Distribution::normalized(atoms, vec![], 1e-9).expect("atoms in [0, 1]")
        }
        PriorFamily::Uniforms(k) => {
            let k = k.max(1);
            let lo = rng.gen_range(0.0..0.2);
            let hi = rng.gen_range(0.8..1.0);
            let mut cuts: Vec<f64> = (1..k).map(|_| rng.gen_range(lo..hi)).collect();
            cuts.push(lo);
            cuts.push(hi);
            cuts.sort_by(f64::total_cmp);
            let ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = ws.iter().sum();
            let uniforms = cuts
                .windows(2)
                .zip(&ws)
                .filter(|(c, _)| c[1] > c[0])
                .map(|(c, w)| Uniform { from: c[0], to: c[1], w: w / total })
                .collect();
            Distribution::normalized(vec![], uniforms, 1e-9).expect("pieces in [0, 1]")
        }
    }
}

/// An ordinally more convex partner of `u`.
pub fn gen_partner(rng: &mut ChaCha8Rng, u: &Payoff, route: PartnerRoute) -> Payoff {
    let c = rng.gen_range(0.2..2.0);
    match route {
        PartnerRoute::Compose => {
            let lo = (0..=1000).map(|k| u.value(k as f64 / 1000.0)).fold(f64::INFINITY, f64::min) - 0.1;
            // φ(t) = t + c(t − lo)², increasing and strictly convex above lo
            let phi = Poly::new(vec![c * lo * lo, 1.0 - 2.0 * c * lo, c]);
            u.composed_with(&phi)
        }
        PartnerRoute::AddConvex => {
            let m0 = rng.gen_range(0.0..1.0);
            u.plus(&Poly::from_local(&[0.0, 0.0, c], m0))
        }
    }
}
