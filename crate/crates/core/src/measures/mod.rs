//! Distributions of posterior means on `[0, 1]`, their integrated CDFs, and the
//! informativeness order.
//!
//! A [`Distribution`] is an exact finite mixture of point masses and uniform
//! segments. Everything that compares or combines distributions goes through
//! the integrated CDF `C_F(x) = ∫₀ˣ F`, which is piecewise quadratic for this
//! family and therefore handled in closed form.

mod cdf;
mod grid;
mod hull;
mod lattice;

pub use cdf::{less_informative, IntegratedCdf, Order, PiecewiseQuadratic, QuadPiece};
pub use grid::{GridSpec, SNAP};
pub use hull::convex_envelope;
pub use lattice::{join, meet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Construction-time tolerance for total mass.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance for comparisons of integrated CDFs coming out of the LP.
pub const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("total mass {0} differs from 1")]
    Mass(f64),
    #[error("means differ: {0} vs {1}")]
    MeanMismatch(f64, f64),
    #[error("event [{0}, {1}] has zero mass")]
    NullEvent(f64, f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    pub from: f64,
    pub to: f64,
    pub w: f64,
}

impl Uniform {
    fn overlap(&self, a: f64, b: f64) -> Option<(f64, f64, f64)> {
        let lo = self.from.max(a);
        let hi = self.to.min(b);
        (hi > lo).then(|| (lo, hi, self.w * (hi - lo) / (self.to - self.from)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawDistribution {
    #[serde(default)]
    atoms: Vec<Atom>,
    #[serde(default)]
    uniforms: Vec<Uniform>,
}

/// A probability distribution on `[0, 1]`: finitely many atoms plus finitely
/// many uniform segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct Distribution {
    atoms: Vec<Atom>,
    uniforms: Vec<Uniform>,
}

impl TryFrom<RawDistribution> for Distribution {
    type Error = MeasureError;
    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        Distribution::new(raw.atoms, raw.uniforms)
    }
}

impl From<Distribution> for RawDistribution {
    fn from(d: Distribution) -> Self {
        RawDistribution {
            atoms: d.atoms,
            uniforms: d.uniforms,
        }
    }
}

impl Distribution {
    /// Validates and canonicalises: zero-weight parts are dropped, atoms are
    /// sorted with coincident locations merged, and total mass must be 1
    /// within [`MASS_TOL`].
    pub fn new(atoms: Vec<Atom>, uniforms: Vec<Uniform>) -> Result<Self, MeasureError> {
        let d = Self::assemble(atoms, uniforms)?;
        let mass = d.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::Mass(mass));
        }
        Ok(d)
    }

    /// Like [`Distribution::new`] but rescales to unit mass when the total is
    /// within `tol` of 1. Used for objects recovered from numerical routines.
    pub fn normalized(atoms: Vec<Atom>, uniforms: Vec<Uniform>, tol: f64) -> Result<Self, MeasureError> {
        let mut d = Self::assemble(atoms, uniforms)?;
        let mass = d.total_mass();
        if (mass - 1.0).abs() > tol {
            return Err(MeasureError::Mass(mass));
        }
        for a in &mut d.atoms {
            a.w /= mass;
        }
        for u in &mut d.uniforms {
            u.w /= mass;
        }
        Ok(d)
    }

    fn assemble(atoms: Vec<Atom>, uniforms: Vec<Uniform>) -> Result<Self, MeasureError> {
        let mut clean_atoms: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !(a.x.is_finite() && a.w.is_finite()) || a.x < 0.0 || a.x > 1.0 || a.w < 0.0 {
                return Err(MeasureError::Invalid(format!("bad atom {a:?}")));
            }
            if a.w > 0.0 {
                clean_atoms.push(a);
            }
        }
        clean_atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut merged: Vec<Atom> = Vec::with_capacity(clean_atoms.len());
        for a in clean_atoms {
            match merged.last_mut() {
                Some(last) if last.x == a.x => last.w += a.w,
                _ => merged.push(a),
            }
        }
        let mut clean_uniforms = Vec::with_capacity(uniforms.len());
        for u in uniforms {
            let finite = u.from.is_finite() && u.to.is_finite() && u.w.is_finite();
            if !finite || u.from < 0.0 || u.to > 1.0 || u.w < 0.0 {
                return Err(MeasureError::Invalid(format!("bad uniform {u:?}")));
            }
            if u.w == 0.0 {
                continue;
            }
            if u.to <= u.from {
                return Err(MeasureError::Invalid(format!("degenerate uniform {u:?}")));
            }
            clean_uniforms.push(u);
        }
        clean_uniforms.sort_by(|a, b| a.from.total_cmp(&b.from).then(a.to.total_cmp(&b.to)));
        Ok(Distribution {
            atoms: merged,
            uniforms: clean_uniforms,
        })
    }

    pub fn point_mass(x: f64) -> Result<Self, MeasureError> {
        Self::new(vec![Atom { x, w: 1.0 }], vec![])
    }

    /// Two-point distribution with weight `wx` on `x` and `1 - wx` on `y`.
    pub fn binary(x: f64, y: f64, wx: f64) -> Result<Self, MeasureError> {
        Self::new(vec![Atom { x, w: wx }, Atom { x: y, w: 1.0 - wx }], vec![])
    }

    /// Two-point distribution on `{lo, hi}` with mean `mean`.
    pub fn two_point_with_mean(lo: f64, hi: f64, mean: f64) -> Result<Self, MeasureError> {
        if hi - lo <= 0.0 {
            return Self::point_mass(mean);
        }
        let wlo = ((hi - mean) / (hi - lo)).clamp(0.0, 1.0);
        Self::binary(lo, hi, wlo)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self, MeasureError> {
        Self::new(vec![], vec![Uniform { from: a, to: b, w: 1.0 }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn uniforms(&self) -> &[Uniform] {
        &self.uniforms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum::<f64>() + self.uniforms.iter().map(|u| u.w).sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.w * a.x).sum::<f64>()
            + self.uniforms.iter().map(|u| u.w * 0.5 * (u.from + u.to)).sum::<f64>()
    }

    pub fn is_atomless(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Smallest interval containing the support.
    pub fn support_hull(&self) -> (f64, f64) {
        let lo = self
            .atoms
            .iter()
            .map(|a| a.x)
            .chain(self.uniforms.iter().map(|u| u.from))
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .atoms
            .iter()
            .map(|a| a.x)
            .chain(self.uniforms.iter().map(|u| u.to))
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// The support as a sorted list of disjoint closed intervals (atoms are
    /// degenerate intervals).
    pub fn support(&self) -> Vec<(f64, f64)> {
        let mut parts: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.x, a.x))
            .chain(self.uniforms.iter().map(|u| (u.from, u.to)))
            .collect();
        parts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        out
    }

    /// True iff the support is a single non-degenerate interval.
    pub fn has_convex_support(&self) -> bool {
        matches!(self.support().as_slice(), [(a, b)] if b > a)
    }

    /// Mass of the closed interval `[a, b]`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        self.atoms.iter().filter(|at| at.x >= a && at.x <= b).map(|at| at.w).sum::<f64>()
            + self
                .uniforms
                .iter()
                .filter_map(|u| u.overlap(a, b))
                .map(|(_, _, w)| w)
                .sum::<f64>()
    }

    /// `F(x)`, the right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.mass_in(f64::NEG_INFINITY, x)
    }

    /// Exact conditional expectation over the closed interval `[a, b]`.
    pub fn conditional_mean(&self, a: f64, b: f64) -> Result<f64, MeasureError> {
        let (mass, moment) = self.mass_and_moment(a, b);
        if mass <= 0.0 {
            return Err(MeasureError::NullEvent(a, b));
        }
        Ok((moment / mass).clamp(a.max(0.0), b.min(1.0)))
    }

    fn mass_and_moment(&self, a: f64, b: f64) -> (f64, f64) {
        let mut mass = 0.0;
        let mut moment = 0.0;
        for at in self.atoms.iter().filter(|at| at.x >= a && at.x <= b) {
            mass += at.w;
            moment += at.w * at.x;
        }
        for (lo, hi, w) in self.uniforms.iter().filter_map(|u| u.overlap(a, b)) {
            mass += w;
            moment += w * 0.5 * (lo + hi);
        }
        (mass, moment)
    }

    /// Keeps the distribution below `a` and pools all mass of `[a, 1]` at its
    /// conditional mean.
    pub fn upper_censorship(&self, a: f64) -> Result<Distribution, MeasureError> {
        let b = self.conditional_mean(a, 1.0)?;
        let (pooled, _) = self.mass_and_moment(a, 1.0);
        let mut atoms: Vec<Atom> = self.atoms.iter().copied().filter(|at| at.x < a).collect();
        let uniforms: Vec<Uniform> = self
            .uniforms
            .iter()
            .filter_map(|u| u.overlap(0.0, a).map(|(lo, hi, w)| Uniform { from: lo, to: hi, w }))
            .collect();
        atoms.push(Atom { x: b, w: pooled });
        Distribution::normalized(atoms, uniforms, 1e-9)
    }

    /// Replaces the conditional distribution on each closed interval by a point
    /// mass at its conditional mean. Intervals must be disjoint; null intervals
    /// are skipped.
    pub fn pool_intervals(&self, intervals: &[(f64, f64)]) -> Result<Distribution, MeasureError> {
        let inside = |x: f64| intervals.iter().any(|&(a, b)| x >= a && x <= b);
        let mut atoms: Vec<Atom> = self.atoms.iter().copied().filter(|at| !inside(at.x)).collect();
        let mut uniforms: Vec<Uniform> = Vec::new();
        for u in &self.uniforms {
            // split the uniform at the interval endpoints and keep the parts outside
            let mut cuts = vec![u.from, u.to];
            for &(a, b) in intervals {
                for c in [a, b] {
                    if c > u.from && c < u.to {
                        cuts.push(c);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                if !inside(mid) {
                    if let Some((lo, hi, mass)) = u.overlap(w[0], w[1]) {
                        uniforms.push(Uniform { from: lo, to: hi, w: mass });
                    }
                }
            }
        }
        for &(a, b) in intervals {
            let (mass, moment) = self.mass_and_moment(a, b);
            if mass > 0.0 {
                atoms.push(Atom {
                    x: (moment / mass).clamp(a, b),
                    w: mass,
                });
            }
        }
        Distribution::normalized(atoms, uniforms, 1e-9)
    }

    /// Projects onto the grid. Each atom, and each piece of a uniform segment
    /// falling in a grid cell, is split between the two cell endpoints so that
    /// its mean is preserved. The integrated CDF is then unchanged at every
    /// grid point.
    pub fn discretize(&self, grid: &GridSpec) -> Distribution {
        let pts = grid.points();
        let mut weights = vec![0.0; pts.len()];
        let mut split = |x: f64, w: f64| {
            if let Some(k) = grid.index_of(x) {
                weights[k] += w;
                return;
            }
            let k = grid.cell_of(x);
            let (l, r) = (pts[k], pts[k + 1]);
            let right = w * (x - l) / (r - l);
            weights[k] += w - right;
            weights[k + 1] += right;
        };
        for a in &self.atoms {
            split(a.x, a.w);
        }
        for u in &self.uniforms {
            let k0 = grid.cell_of(u.from);
            for k in k0..pts.len() - 1 {
                if pts[k] >= u.to {
                    break;
                }
                if let Some((lo, hi, w)) = u.overlap(pts[k], pts[k + 1]) {
                    let mean = 0.5 * (lo + hi);
                    let (l, r) = (pts[k], pts[k + 1]);
                    let right = w * (mean - l) / (r - l);
                    weights[k] += w - right;
                    weights[k + 1] += right;
                }
            }
        }
        Distribution::from_grid_weights(grid, &weights).expect("discretization preserves mass")
    }

    /// Atomic distribution with `weights[i]` at grid point `i`. Round-off
    /// negatives down to `-1e-9` are clamped.
    pub fn from_grid_weights(grid: &GridSpec, weights: &[f64]) -> Result<Distribution, MeasureError> {
        if weights.len() != grid.len() {
            return Err(MeasureError::Invalid("weight vector does not match grid".into()));
        }
        if let Some(w) = weights.iter().find(|w| **w < -1e-9) {
            return Err(MeasureError::Invalid(format!("negative grid weight {w}")));
        }
        let atoms = grid
            .points()
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 1e-15)
            .map(|(&x, &w)| Atom { x, w })
            .collect();
        Distribution::normalized(atoms, vec![], 1e-8)
    }

    /// Weight vector on the grid; every atom must sit on a grid point and
    /// there must be no uniform part.
    pub fn grid_weights(&self, grid: &GridSpec) -> Result<Vec<f64>, MeasureError> {
        if !self.uniforms.is_empty() {
            return Err(MeasureError::Invalid("distribution has a continuous part".into()));
        }
        let mut w = vec![0.0; grid.len()];
        for a in &self.atoms {
            let k = grid
                .index_of(a.x)
                .ok_or_else(|| MeasureError::Invalid(format!("atom at {} is off the grid", a.x)))?;
            w[k] += a.w;
        }
        Ok(w)
    }

    pub fn integrated_cdf(&self) -> IntegratedCdf {
        IntegratedCdf::of(self)
    }

    /// Sup-norm distance between integrated CDFs; zero iff the distributions coincide.
    pub fn distance(&self, other: &Distribution) -> f64 {
        self.integrated_cdf().sup_distance(&other.integrated_cdf())
    }

    /// `∫ g dF` for a function given on each piece; uniform parts are integrated
    /// by `segment_integral(lo, hi)` which must return `∫_lo^hi g`.
    pub fn expect_with(&self, point: impl Fn(f64) -> f64, segment_integral: impl Fn(f64, f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.w * point(a.x)).sum::<f64>()
            + self
                .uniforms
                .iter()
                .map(|u| u.w / (u.to - u.from) * segment_integral(u.from, u.to))
                .sum::<f64>()
    }
}

/// Free-function form of [`Distribution::conditional_mean`].
pub fn conditional_mean(f: &Distribution, a: f64, b: f64) -> Result<f64, MeasureError> {
    f.conditional_mean(a, b)
}

/// Free-function form of [`Distribution::upper_censorship`].
pub fn upper_censorship(f0: &Distribution, a: f64) -> Result<Distribution, MeasureError> {
    f0.upper_censorship(a)
}

/// Free-function form of [`Distribution::discretize`].
pub fn discretize(f: &Distribution, grid: &GridSpec) -> Distribution {
    f.discretize(grid)
}
