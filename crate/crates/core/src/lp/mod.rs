// SPDX-License-Identifier: Apache-2.0

//! Linear programs and the bundled revised simplex solver.
//!
//! Programs are always minimizations `min c'x` over sparse rows with
//! `<=`, `=` or `>=` senses and simple variable bounds. The solver reports
//! one dual multiplier per row with the usual sign convention for a
//! minimization: `<=` rows have duals `<= 0`, `>=` rows have duals `>= 0`.

mod mps;
mod simplex;

pub use mps::write_mps;
pub use simplex::SolverOptions;

use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Relative tolerance for the duality gap check.
pub const DUALITY_GAP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    /// `f64::INFINITY` when the variable has no upper bound.
    pub upper: Vec<f64>,
    pub col_labels: Vec<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable with bounds `[lower, upper]` and returns its index.
    pub fn add_var(&mut self, label: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.col_labels.push(label.into());
        self.objective.len() - 1
    }

    /// Adds a nonnegative variable without upper bound.
    pub fn add_nonneg(&mut self, label: impl Into<String>, cost: f64) -> usize {
        self.add_var(label, cost, 0.0, f64::INFINITY)
    }

    pub fn add_row(&mut self, label: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs, label: label.into() });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.col_labels.len() != n {
            return Err(Error::structural("bound and label vectors must match the objective length"));
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::validation(format!("objective coefficient of {} is not finite", self.col_labels[j])));
            }
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || up.is_nan() || lo == f64::INFINITY || up == f64::NEG_INFINITY || lo > up {
                return Err(Error::validation(format!("invalid bounds [{lo}, {up}] on {}", self.col_labels[j])));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::validation(format!("row {} has a non-finite right-hand side", row.label)));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::structural(format!("row {} references variable {j} of {n}", row.label)));
                }
                if !a.is_finite() {
                    return Err(Error::validation(format!("row {} has a non-finite coefficient", row.label)));
                }
            }
        }
        Ok(())
    }

    /// Left-hand side value of every row at `x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (row, act) in self.rows.iter().zip(self.row_activity(x)) {
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row; empty unless optimal.
    pub duals: Vec<f64>,
    /// Reduced cost of every structural variable; empty unless optimal.
    pub reduced_costs: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b'y` plus the contribution of variables resting at
    /// nonzero bounds. Equals the primal objective at an optimum.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let rows: f64 = lp.rows.iter().zip(&self.duals).map(|(r, y)| r.rhs * y).sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&self.primal)
            .filter(|(d, _)| d.abs() > 0.0)
            .map(|(d, x)| d * x)
            .sum();
        rows + bounds
    }
}

/// Solves `lp` with the default solver options.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    simplex::solve(lp, &SolverOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, options: &SolverOptions) -> Result<LpSolution> {
    simplex::solve(lp, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_variable_bound_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg("x", 1.0);
        lp.add_row("x>=1", vec![(x, 1.0)], Sense::Ge, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg("x", 0.0);
        lp.add_row("x<=-1", vec![(x, 1.0)], Sense::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn two_variable_vertex() {
        // Vertices of {a+b>=4, a<=3, b<=3, a,b>=0}: (1,3), (3,1), (3,3); costs 18, 14, 24.
        let mut lp = LinearProgram::new();
        let a = lp.add_nonneg("a", 3.0);
        let b = lp.add_nonneg("b", 5.0);
        lp.add_row("sum", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 4.0);
        lp.add_row("a", vec![(a, 1.0)], Sense::Le, 3.0);
        lp.add_row("b", vec![(b, 1.0)], Sense::Le, 3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[a] - 3.0).abs() < 1e-9);
        assert!((sol.primal[b] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 14.0).abs() < 1e-9);
        // Marginal values: extra demand costs 5, relaxing a<=3 saves 2.
        assert!((sol.duals[0] - 5.0).abs() < 1e-9);
        assert!((sol.duals[1] + 2.0).abs() < 1e-9);
        assert!(sol.duals[2].abs() < 1e-9);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new();
        let x = lp.add_nonneg("x", -1.0);
        let y = lp.add_nonneg("y", 0.0);
        lp.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_upper_bounds() {
        // min -x - 2y  s.t. x + y = 4, 0<=x<=3, 0<=y<=2.5 -> y=2.5, x=1.5
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", -1.0, 0.0, 3.0);
        let y = lp.add_var("y", -2.0, 0.0, 2.5);
        lp.add_row("eq", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.primal[x] - 1.5).abs() < 1e-9);
        assert!((sol.primal[y] - 2.5).abs() < 1e-9);
        assert!((sol.objective + 6.5).abs() < 1e-9);
        assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn free_variable() {
        // min x s.t. x >= -5 as a row, x free.
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_row("r", vec![(x, 1.0)], Sense::Ge, -5.0);
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.primal[x] + 5.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_index() {
        let mut lp = LinearProgram::new();
        lp.add_nonneg("x", 1.0);
        lp.add_row("r", vec![(3, 1.0)], Sense::Le, 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Structural(_))));
    }

    /// Enumerates all basic solutions of `{Ax <= b, x >= 0}` for two variables.
    fn vertex_oracle(c: [f64; 2], rows: &[([f64; 2], f64)]) -> Option<f64> {
        let mut lines: Vec<([f64; 2], f64)> = rows.to_vec();
        lines.push(([1.0, 0.0], 0.0));
        lines.push(([0.0, 1.0], 0.0));
        let mut best: Option<f64> = None;
        for p in 0..lines.len() {
            for q in p + 1..lines.len() {
                let (a, b) = (lines[p], lines[q]);
                let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (a.1 * b.0[1] - a.0[1] * b.1) / det;
                let y = (a.0[0] * b.1 - a.1 * b.0[0]) / det;
                let feasible = x >= -1e-9 && y >= -1e-9 && rows.iter().all(|(r, rhs)| r[0] * x + r[1] * y <= rhs + 1e-9);
                if feasible {
                    let v = c[0] * x + c[1] * y;
                    best = Some(best.map_or(v, |b: f64| b.min(v)));
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_vertex_enumeration_and_duality(
            c in prop::array::uniform2(0.1..10.0f64),
            rows in prop::collection::vec((prop::array::uniform2(-5.0..5.0f64), 0.5..20.0f64), 1..6),
            demand in 0.0..5.0f64,
        ) {
            // Bounded region: add a box and a covering row that makes the optimum nontrivial.
            let mut all: Vec<([f64; 2], f64)> = rows.clone();
            all.push(([1.0, 0.0], 10.0));
            all.push(([0.0, 1.0], 10.0));
            all.push(([-1.0, -1.0], -demand));
            let mut lp = LinearProgram::new();
            lp.add_nonneg("x", c[0]);
            lp.add_nonneg("y", c[1]);
            for (k, (a, b)) in all.iter().enumerate() {
                lp.add_row(format!("r{k}"), vec![(0, a[0]), (1, a[1])], Sense::Le, *b);
            }
            let sol = solve_lp(&lp).unwrap();
            match vertex_oracle(c, &all) {
                None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
                Some(best) => {
                    prop_assert_eq!(sol.status, LpStatus::Optimal);
                    prop_assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()));
                    prop_assert!(lp.max_violation(&sol.primal) <= FEASIBILITY_TOL * 10.0);
                    let gap = (sol.objective - sol.dual_objective(&lp)).abs();
                    prop_assert!(gap <= DUALITY_GAP_TOL * (1.0 + sol.objective.abs()));
                    let act = lp.row_activity(&sol.primal);
                    for (k, row) in lp.rows.iter().enumerate() {
                        prop_assert!(sol.duals[k] <= 1e-12);
                        let slack = row.rhs - act[k];
                        prop_assert!((sol.duals[k] * slack).abs() <= 1e-6 * (1.0 + row.rhs.abs()));
                    }
                    let again = solve_lp(&lp).unwrap();
                    prop_assert_eq!(again.objective.to_bits(), sol.objective.to_bits());
                }
            }
        }
    }
}
