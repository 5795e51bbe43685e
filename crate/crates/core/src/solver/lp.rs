//! Dense-tableau two-phase simplex for small maximisation problems.
//!
//! Dantzig pricing with a switch to Bland's rule after a run of degenerate
//! pivots. The final tableau is kept so that the same feasible set can be
//! re-optimised with another objective, optionally restricted to the optimal
//! face of the previous one.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_AFTER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `max c·x` subject to the rows and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lp {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl Lp {
    pub fn new(objective: Vec<f64>) -> Self {
        Lp { objective, rows: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.rows.push(Row { coeffs, kind, rhs });
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("infeasible (phase one residual {0:e})")]
    Infeasible(f64),
    #[error("unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    ncols: usize,
    n_struct: usize,
    /// row-major, `ncols + 1` wide; last entry is the right-hand side
    tab: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<Col>,
    allowed: Vec<bool>,
    cost: Vec<f64>,
    /// reduced costs `c_j − c_B·B⁻¹A_j`
    reduced: Vec<f64>,
    pub pivots: usize,
    since_refactor: usize,
    /// the sign-normalised initial tableau, for refactorisation
    original: Vec<f64>,
}

impl Simplex {
    pub fn solve(lp: &Lp) -> Result<Simplex, LpError> {
        let mut s = Simplex::build(lp);
        s.phase_one()?;
        s.set_objective(&lp.objective);
        s.run()?;
        Ok(s)
    }

    fn build(lp: &Lp) -> Simplex {
        let n = lp.objective.len();
        let m = lp.rows.len();
        let n_slack = lp.rows.iter().filter(|r| r.kind != RowKind::Eq).count();
        // rows are sign-normalised so that rhs ≥ 0 (a `≥ 0` row is flipped too);
        // an artificial is needed unless the row then reads `≤`
        let flips: Vec<bool> = lp
            .rows
            .iter()
            .map(|r| r.rhs < 0.0 || (r.rhs == 0.0 && r.kind == RowKind::Ge))
            .collect();
        let needs_art: Vec<bool> = lp
            .rows
            .iter()
            .zip(&flips)
            .map(|(r, &flip)| match r.kind {
                RowKind::Eq => true,
                RowKind::Le => flip,
                RowKind::Ge => !flip,
            })
            .collect();
        let n_art = needs_art.iter().filter(|b| **b).count();
        let ncols = n + n_slack + n_art;
        let width = ncols + 1;
        let mut tab = vec![0.0; m * width];
        let mut kinds = vec![Col::Structural; n];
        kinds.extend(std::iter::repeat_n(Col::Slack, n_slack));
        kinds.extend(std::iter::repeat_n(Col::Artificial, n_art));
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, n + n_slack);
        for (i, r) in lp.rows.iter().enumerate() {
            let sign = if flips[i] { -1.0 } else { 1.0 };
            let row = &mut tab[i * width..(i + 1) * width];
            for (j, &a) in r.coeffs.iter().enumerate() {
                row[j] = sign * a;
            }
            row[ncols] = sign * r.rhs;
            match r.kind {
                RowKind::Le | RowKind::Ge => {
                    let s = if r.kind == RowKind::Le { 1.0 } else { -1.0 };
                    row[slack] = sign * s;
                    if !needs_art[i] {
                        basis[i] = slack;
                    }
                    slack += 1;
                }
                RowKind::Eq => {}
            }
            if needs_art[i] {
                row[art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
        Simplex {
            m,
            ncols,
            n_struct: n,
            tab: tab.clone(),
            basis,
            kinds,
            allowed: vec![true; ncols],
            cost: vec![0.0; ncols],
            reduced: vec![0.0; ncols],
            pivots: 0,
            since_refactor: 0,
            original: tab,
        }
    }

    fn width(&self) -> usize {
        self.ncols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.tab[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.ncols)
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        if !self.kinds.contains(&Col::Artificial) {
            return Ok(());
        }
        let cost: Vec<f64> = self.kinds.iter().map(|k| if *k == Col::Artificial { -1.0 } else { 0.0 }).collect();
        self.cost = cost;
        self.refresh_reduced();
        self.run()?;
        let residual = -self.value();
        let scale = 1.0 + (0..self.m).map(|i| self.rhs(i).abs()).fold(0.0, f64::max);
        if residual > 1e-9 * scale {
            return Err(LpError::Infeasible(residual));
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..self.m {
            if self.kinds[self.basis[r]] != Col::Artificial {
                continue;
            }
            let q = (0..self.ncols)
                .filter(|&j| self.kinds[j] != Col::Artificial)
                .max_by(|&a, &b| self.at(r, a).abs().total_cmp(&self.at(r, b).abs()));
            if let Some(q) = q.filter(|&q| self.at(r, q).abs() > PIVOT_TOL) {
                self.pivot(r, q);
            }
        }
        for j in 0..self.ncols {
            if self.kinds[j] == Col::Artificial {
                self.allowed[j] = false;
            }
        }
        Ok(())
    }

    /// Replaces the objective (structural part; slacks cost nothing) and
    /// recomputes reduced costs for the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        self.cost = vec![0.0; self.ncols];
        self.cost[..self.n_struct].copy_from_slice(c);
        self.refresh_reduced();
    }

    fn refresh_reduced(&mut self) {
        let w = self.width();
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[i * w..i * w + self.ncols];
            for (dj, a) in d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        self.reduced = d;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width();
        let p = self.tab[r * w + q];
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        let prow: Vec<f64> = self.tab[r * w..(r + 1) * w].to_vec();
        let nz: Vec<usize> = (0..w).filter(|&j| prow[j] != 0.0).collect();
        let dense = nz.len() * 4 > w;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            if dense {
                for (a, b) in row.iter_mut().zip(&prow) {
                    *a -= f * b;
                }
            } else {
                for &j in &nz {
                    row[j] -= f * prow[j];
                }
            }
            row[q] = 0.0;
        }
        let f = self.reduced[q];
        if f != 0.0 {
            for &j in nz.iter().filter(|&&j| j < self.ncols) {
                self.reduced[j] -= f * prow[j];
            }
            self.reduced[q] = 0.0;
        }
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Pivots to optimality, rebuilding the tableau from the original data
    /// after long pivot sequences so that round-off does not accumulate.
    fn run(&mut self) -> Result<(), LpError> {
        for _ in 0..3 {
            self.iterate()?;
            if self.since_refactor <= REFACTOR_AFTER || !self.refactor() {
                return Ok(());
            }
            self.refresh_reduced();
            if !self.reduced.iter().zip(&self.allowed).any(|(d, a)| *a && *d > COST_TOL) {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Recomputes `B⁻¹[A | b]` for the current basis by Gauss–Jordan
    /// elimination with partial pivoting. Returns false (leaving the tableau
    /// untouched) if the basis looks singular.
    fn refactor(&mut self) -> bool {
        let w = self.width();
        let mut t = self.original.clone();
        let mut used = vec![false; self.m];
        let mut basis = vec![usize::MAX; self.m];
        for &b in &self.basis {
            let Some(r) = (0..self.m)
                .filter(|&i| !used[i])
                .max_by(|&i, &k| t[i * w + b].abs().total_cmp(&t[k * w + b].abs()))
            else {
                return false;
            };
            let p = t[r * w + b];
            if p.abs() < 1e-12 {
                return false;
            }
            for v in &mut t[r * w..(r + 1) * w] {
                *v /= p;
            }
            let prow: Vec<f64> = t[r * w..(r + 1) * w].to_vec();
            for i in (0..self.m).filter(|&i| i != r) {
                let f = t[i * w + b];
                if f != 0.0 {
                    for (a, c) in t[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                        *a -= f * c;
                    }
                    t[i * w + b] = 0.0;
                }
            }
            used[r] = true;
            basis[r] = b;
        }
        self.tab = t;
        self.basis = basis;
        self.since_refactor = 0;
        true
    }

    fn iterate(&mut self) -> Result<(), LpError> {
        let limit = 50 * (self.m + self.ncols) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..limit {
            let bland = degenerate >= DEGENERATE_RUN;
            let q = if bland {
                (0..self.ncols).find(|&j| self.allowed[j] && self.reduced[j] > COST_TOL)
            } else {
                (0..self.ncols)
                    .filter(|&j| self.allowed[j] && self.reduced[j] > COST_TOL)
                    .max_by(|&a, &b| self.reduced[a].total_cmp(&self.reduced[b]))
            };
            let Some(q) = q else { return Ok(()) };
            let mut best: Option<(usize, f64, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, q);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                let better = match best {
                    None => true,
                    Some((bi, br, ba)) => {
                        if ratio < br - 1e-12 {
                            true
                        } else if ratio <= br + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                a > ba
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((i, ratio, a));
                }
            }
            let Some((r, ratio, _)) = best else { return Err(LpError::Unbounded) };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q);
        }
        Err(LpError::IterationLimit(limit))
    }

    /// Objective value of the current basic solution.
    pub fn value(&self) -> f64 {
        (0..self.m).map(|i| self.cost[self.basis[i]] * self.rhs(i)).sum()
    }

    /// Structural part of the current basic solution.
    pub fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n_struct {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        x
    }

    /// Freezes at zero every column whose reduced cost is below `-tol`, which
    /// confines further pivoting to the optimal face of the current objective.
    pub fn restrict_to_optimal_face(&mut self, tol: f64) {
        for j in 0..self.ncols {
            if self.reduced[j] < -tol {
                self.allowed[j] = false;
            }
        }
    }

    /// Optimises a new objective from the current basis.
    pub fn reoptimize(&mut self, c: &[f64]) -> Result<(), LpError> {
        self.set_objective(c);
        self.run()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = Lp::new(vec![3.0, 5.0]);
        lp.push(vec![1.0, 0.0], RowKind::Le, 4.0);
        lp.push(vec![0.0, 2.0], RowKind::Le, 12.0);
        lp.push(vec![3.0, 2.0], RowKind::Le, 18.0);
        let s = Simplex::solve(&lp).unwrap();
        assert!((s.value() - 36.0).abs() < 1e-12);
        let x = s.primal();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equalities_and_lower_bounds() {
        // max x − y, x + y = 1, x ≥ 0.25, y ≥ 0.3 → x = 0.7
        let mut lp = Lp::new(vec![1.0, -1.0]);
        lp.push(vec![1.0, 1.0], RowKind::Eq, 1.0);
        lp.push(vec![1.0, 0.0], RowKind::Ge, 0.25);
        lp.push(vec![0.0, 1.0], RowKind::Ge, 0.3);
        let s = Simplex::solve(&lp).unwrap();
        assert!((s.value() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(vec![1.0]);
        lp.push(vec![1.0], RowKind::Le, 1.0);
        lp.push(vec![1.0], RowKind::Ge, 2.0);
        assert!(matches!(Simplex::solve(&lp), Err(LpError::Infeasible(_))));
        let mut lp = Lp::new(vec![1.0, 0.0]);
        lp.push(vec![-1.0, 1.0], RowKind::Le, 1.0);
        assert!(matches!(Simplex::solve(&lp), Err(LpError::Unbounded)));
    }

    #[test]
    fn secondary_objective_on_optimal_face() {
        // max x + y on the simplex x + y + z = 1: face is {z = 0}
        let mut lp = Lp::new(vec![1.0, 1.0, 0.0]);
        lp.push(vec![1.0, 1.0, 1.0], RowKind::Eq, 1.0);
        let mut s = Simplex::solve(&lp).unwrap();
        s.restrict_to_optimal_face(1e-9);
        s.reoptimize(&[0.0, 0.0, 1.0]).unwrap();
        assert!(s.primal()[2].abs() < 1e-15);
        s.reoptimize(&[0.0, 1.0, 0.0]).unwrap();
        assert!((s.primal()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example
        let mut lp = Lp::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.push(vec![0.25, -60.0, -0.04, 9.0], RowKind::Le, 0.0);
        lp.push(vec![0.5, -90.0, -0.02, 3.0], RowKind::Le, 0.0);
        lp.push(vec![0.0, 0.0, 1.0, 0.0], RowKind::Le, 1.0);
        let s = Simplex::solve(&lp).unwrap();
        assert!((s.value() - 0.05).abs() < 1e-12);
    }
}
