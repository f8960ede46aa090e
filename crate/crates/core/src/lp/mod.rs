//! Linear programming: a bounded-variable revised simplex and the builders
//! for the trust-region subproblem and the criticality measure.

mod enumerate;
mod simplex;
mod subproblem;

use serde::{Deserialize, Serialize};

pub use enumerate::enumerate_vertices;
pub use simplex::{PricingRule, SimplexOptions};
pub use subproblem::{build_subproblem, criticality, solve_subproblem, Subproblem, SubproblemSolution};

use crate::error::{check_dim, Error, Result};

/// Absolute feasibility and optimality tolerance used throughout.
pub const LP_TOL: f64 = 1e-9;

/// A sparse linear row `coeffs · x (≤ | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn dense(coeffs: &[f64], rhs: f64) -> Self {
        let coeffs = coeffs
            .iter()
            .enumerate()
            .filter_map(|(j, &v)| (v != 0.0).then_some((j, v)))
            .collect();
        Self { coeffs, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, v)| v * x[j]).sum()
    }
}

/// `min c·x  s.t.  A_ub x ≤ b_ub,  A_eq x = b_eq,  lower ≤ x ≤ upper`.
///
/// Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub ub_rows: Vec<LinearRow>,
    pub eq_rows: Vec<LinearRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// A problem with the given objective and every variable free.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            ub_rows: Vec::new(),
            eq_rows: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_ub_row(mut self, row: LinearRow) -> Self {
        self.ub_rows.push(row);
        self
    }

    pub fn with_eq_row(mut self, row: LinearRow) -> Self {
        self.eq_rows.push(row);
        self
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.ub_rows.len() + self.eq_rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        check_dim(n, self.lower.len(), "lp lower bounds")?;
        check_dim(n, self.upper.len(), "lp upper bounds")?;
        for row in self.ub_rows.iter().chain(&self.eq_rows) {
            if let Some(&(j, _)) = row.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(Error::Dimension {
                    expected: n,
                    actual: j + 1,
                    context: "lp row column index",
                });
            }
            if !row.rhs.is_finite() {
                return Err(Error::InvalidParameter("non-finite lp right-hand side".into()));
            }
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if l > u || l.is_nan() || u.is_nan() || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(format!("invalid bounds [{l}, {u}]")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite lp objective".into()));
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.ub_rows {
            worst = worst.max(row.activity(x) - row.rhs);
        }
        for row in &self.eq_rows {
            worst = worst.max((row.activity(x) - row.rhs).abs());
        }
        for ((xi, l), u) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - xi).max(xi - u);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `problem` with the default simplex options.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(problem, &SimplexOptions::default())
}

pub fn solve_lp_with(problem: &LpProblem, options: &SimplexOptions) -> Result<LpSolution> {
    problem.validate()?;
    Ok(simplex::solve(problem, options))
}
