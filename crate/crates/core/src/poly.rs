//! Dense univariate polynomials in the global variable `m`.
//!
//! Coefficients are stored in increasing-degree order, matching the payoff
//! JSON schema. Root finding is restricted to a closed interval and works by
//! recursively isolating monotone pieces between critical points, so it
//! handles any degree without a companion matrix.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly(vec![0.0])
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `intercept + slope * m`.
    pub fn linear(intercept: f64, slope: f64) -> Self {
        Poly::new(vec![intercept, slope])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    fn trim(&mut self) {
        while self.0.len() > 1 && *self.0.last().unwrap() == 0.0 {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(0.0);
        }
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Poly {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0.0);
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Poly::new(out)
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly::new(
            (0..n)
                .map(|k| self.0.get(k).copied().unwrap_or(0.0) + other.0.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `self(inner(m))`, by Horner's scheme over polynomials.
    pub fn compose(&self, inner: &Poly) -> Poly {
        self.0
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, &c| acc.mul(inner).add(&Poly::constant(c)))
    }

    /// Converts a polynomial in the local variable `t = m - shift` into one in `m`.
    pub fn from_local(local: &[f64], shift: f64) -> Poly {
        Poly::new(local.to_vec()).compose(&Poly::linear(-shift, 1.0))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Real roots in `[a, b]`, sorted, found by isolating monotone pieces.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        if a > b {
            return Vec::new();
        }
        let d = self.degree();
        if d == 0 {
            return Vec::new();
        }
        if d == 1 {
            let r = -self.0[0] / self.0[1];
            return if r >= a && r <= b { vec![r] } else { Vec::new() };
        }
        let mut breaks = vec![a];
        breaks.extend(self.derivative().roots_in(a, b));
        breaks.push(b);
        breaks.dedup_by(|x, y| (*x - *y).abs() <= 0.0);

        let mut roots: Vec<f64> = Vec::new();
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if flo == 0.0 {
                push_root(&mut roots, lo);
            }
            if fhi == 0.0 {
                push_root(&mut roots, hi);
            }
            if flo.signum() * fhi.signum() < 0.0 {
                push_root(&mut roots, bisect(|x| self.eval(x), lo, hi, flo));
            }
        }
        roots
    }

    /// Maximum of the polynomial over `[a, b]` and a maximizer.
    pub fn max_on(&self, a: f64, b: f64) -> (f64, f64) {
        let mut best = (self.eval(a), a);
        let fb = self.eval(b);
        if fb > best.0 {
            best = (fb, b);
        }
        for r in self.derivative().roots_in(a, b) {
            let v = self.eval(r);
            if v > best.0 {
                best = (v, r);
            }
        }
        best
    }

    pub fn min_on(&self, a: f64, b: f64) -> (f64, f64) {
        let (v, x) = self.scale(-1.0).max_on(a, b);
        (-v, x)
    }
}

fn push_root(roots: &mut Vec<f64>, r: f64) {
    if roots.last().is_none_or(|&last| r > last) {
        roots.push(r);
    }
}

/// Bisection on a bracketing interval; `flo` is `f(lo)`.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let s = flo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
