//! Dense two-phase tableau simplex for small problems of the form
//! `max c.x  s.t.  A x <= b, x >= 0`.
//!
//! Entering and leaving variables follow Bland's lowest-index rule, so the
//! method terminates on degenerate problems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex did not converge within {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    /// Coefficients of the maximized objective.
    pub objective: Vec<f64>,
    /// Rows of `A` in `A x <= b`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Append `row . x <= rhs`.
    pub fn push_le(&mut self, row: Vec<f64>, rhs: f64) -> usize {
        self.rows.push(row);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Append `row . x >= rhs` (stored negated).
    pub fn push_ge(&mut self, row: Vec<f64>, rhs: f64) -> usize {
        self.push_le(row.into_iter().map(|v| -v).collect(), -rhs)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.rows.len() != self.rhs.len() {
            return Err(LpError::Malformed(format!(
                "{} rows but {} right-hand sides",
                self.rows.len(),
                self.rhs.len()
            )));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != n) {
            return Err(LpError::Malformed(format!(
                "row {i} has {} coefficients, expected {n}",
                self.rows[i].len()
            )));
        }
        let all = self
            .objective
            .iter()
            .chain(self.rows.iter().flatten())
            .chain(&self.rhs);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// `b - A x` for every row.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| b - row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// Constraint rows; the last column holds the right-hand side.
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row, same width as constraint rows. The last entry is
    /// the current objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns that may never enter the basis (retired artificials).
    blocked: Vec<bool>,
    pivots: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cost.len() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Recompute reduced costs for maximizing `c` (indexed by column) over
    /// the current basis.
    fn set_objective(&mut self, c: &[f64]) {
        let w = self.width();
        let mut cost = vec![0.0; w + 1];
        for (j, cj) in c.iter().enumerate() {
            cost[j] = -cj;
        }
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = c.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (v, rv) in cost.iter_mut().zip(row) {
                    *v += cb * rv;
                }
            }
        }
        self.cost = cost;
    }

    fn optimize(&mut self) -> Result<(), LpError> {
        let w = self.width();
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
            let Some(col) = (0..w).find(|&j| !self.blocked[j] && self.cost[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = row[w] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= PIVOT_TOL * br.abs().max(1.0);
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
    }
}

pub fn simplex_solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.rows.len();
    let needs_art: Vec<bool> = lp.rhs.iter().map(|&b| b < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = n + m + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_col = n + m;
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        let sign = if needs_art[i] { -1.0 } else { 1.0 };
        for (j, a) in lp.rows[i].iter().enumerate() {
            row[j] = sign * a;
        }
        row[n + i] = sign;
        row[width] = sign * lp.rhs[i];
        if needs_art[i] {
            row[art_col] = 1.0;
            basis.push(art_col);
            art_col += 1;
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }

    let mut tab = Tableau {
        rows,
        cost: vec![0.0; width + 1],
        basis,
        blocked: vec![false; width],
        pivots: 0,
    };

    if n_art > 0 {
        let mut phase1 = vec![0.0; width];
        for v in &mut phase1[n + m..] {
            *v = -1.0;
        }
        tab.set_objective(&phase1);
        tab.optimize()?;
        let scale = lp.rhs.iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
        if tab.cost[width] < -PIVOT_TOL * scale {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                    tab.pivot(i, j);
                }
            }
        }
        for b in &mut tab.blocked[n + m..] {
            *b = true;
        }
    }

    tab.set_objective(&lp.objective);
    tab.optimize()?;

    let mut x = vec![0.0; n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[width].max(0.0);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.push_le(vec![1.0], 5.0);
        let sol = simplex_solve(&lp).unwrap();
        assert_relative_eq!(sol.x[0], 5.0);
        assert_relative_eq!(sol.objective, 5.0);
    }

    #[test]
    fn two_variable_vertex() {
        let mut lp = LinearProgram::new(vec![3.0, 2.0]);
        lp.push_le(vec![1.0, 1.0], 4.0);
        lp.push_le(vec![1.0, 0.0], 2.0);
        let sol = simplex_solve(&lp).unwrap();
        assert_relative_eq!(sol.x[0], 2.0);
        assert_relative_eq!(sol.x[1], 2.0);
        assert_relative_eq!(sol.objective, 10.0);
    }

    #[test]
    fn infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.push_le(vec![-1.0], -1.0);
        lp.push_le(vec![1.0], 0.0);
        assert_eq!(simplex_solve(&lp), Err(LpError::Infeasible));
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.push_le(vec![1.0, -1.0], 1.0);
        assert_eq!(simplex_solve(&lp), Err(LpError::Unbounded));
    }

    #[test]
    fn lower_bound_rows_use_phase_one() {
        // max -x - y  s.t.  x + y >= 3, x <= 2
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.push_ge(vec![1.0, 1.0], 3.0);
        lp.push_le(vec![1.0, 0.0], 2.0);
        let sol = simplex_solve(&lp).unwrap();
        assert_relative_eq!(sol.objective, -3.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x[0] + sol.x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn equality_via_paired_rows() {
        // max x + 2y  s.t.  x + y = 4, y <= 3
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.push_le(vec![1.0, 1.0], 4.0);
        lp.push_ge(vec![1.0, 1.0], 4.0);
        lp.push_le(vec![0.0, 1.0], 3.0);
        let sol = simplex_solve(&lp).unwrap();
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale); Bland's rule must terminate.
        let mut lp = LinearProgram::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.push_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.push_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.push_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let sol = simplex_solve(&lp).unwrap();
        assert_relative_eq!(sol.objective, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.push_le(vec![1.0], 1.0);
        assert!(matches!(simplex_solve(&lp), Err(LpError::Malformed(_))));
        let mut lp = LinearProgram::new(vec![f64::NAN]);
        lp.push_le(vec![1.0], 1.0);
        assert!(matches!(simplex_solve(&lp), Err(LpError::Malformed(_))));
    }
}
