use serde::{Deserialize, Serialize};

use super::MeasureError;

/// Points closer than this to an existing grid point are treated as on the grid.
pub const SNAP: f64 = 1e-9;

/// A finite, strictly increasing set of points in `[0, 1]` containing both endpoints.
///
/// `uniform(n)` gives `x_i = i / (n - 1)`; `refined_with` inserts extra points
/// (payoff kinks, construction coordinates) without disturbing the uniform ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    points: Vec<f64>,
}

impl GridSpec {
    pub fn uniform(n: usize) -> Result<Self, MeasureError> {
        if n < 3 {
            return Err(MeasureError::InvalidGrid(format!("grid needs at least 3 points, got {n}")));
        }
        let step = (n - 1) as f64;
        Ok(GridSpec {
            points: (0..n).map(|i| i as f64 / step).collect(),
        })
    }

    pub fn from_points(mut points: Vec<f64>) -> Result<Self, MeasureError> {
        if points.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(MeasureError::InvalidGrid("grid points must lie in [0,1]".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= SNAP);
        if points.first() != Some(&0.0) || points.last() != Some(&1.0) {
            return Err(MeasureError::InvalidGrid("grid must contain 0 and 1".into()));
        }
        if points.len() < 3 {
            return Err(MeasureError::InvalidGrid("grid needs at least 3 points".into()));
        }
        Ok(GridSpec { points })
    }

    /// Inserts every point of `extra` that is not already within [`SNAP`] of the grid.
    pub fn refined_with(&self, extra: &[f64]) -> GridSpec {
        let mut points = self.points.clone();
        for &x in extra {
            if (0.0..=1.0).contains(&x) && !self.contains(x) {
                points.push(x);
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= SNAP);
        GridSpec { points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.index_of(x).is_some()
    }

    /// Index of the grid point within [`SNAP`] of `x`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = self.points.partition_point(|&p| p < x);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.points.len())
            .find(|&k| (self.points[k] - x).abs() <= SNAP)
    }

    /// Index `k` with `points[k] <= x < points[k + 1]` (the last cell for `x = 1`).
    pub fn cell_of(&self, x: f64) -> usize {
        let i = self.points.partition_point(|&p| p <= x);
        i.saturating_sub(1).min(self.points.len() - 2)
    }

    pub fn is_uniform(&self) -> bool {
        let n = self.points.len();
        self.points
            .iter()
            .enumerate()
            .all(|(i, &p)| (p - i as f64 / (n - 1) as f64).abs() <= 1e-15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_has_endpoints() {
        let g = GridSpec::uniform(5).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(g.is_uniform());
        assert!(GridSpec::uniform(2).is_err());
    }

    #[test]
    fn refinement_inserts_and_snaps() {
        let g = GridSpec::uniform(3).unwrap().refined_with(&[0.3, 0.5 + 1e-12, 0.3]);
        assert_eq!(g.points(), &[0.0, 0.3, 0.5, 1.0]);
        assert_eq!(g.index_of(0.3), Some(1));
        assert_eq!(g.index_of(0.31), None);
        assert_eq!(g.cell_of(0.4), 1);
        assert_eq!(g.cell_of(1.0), 2);
    }
}
