//! The trust-region LP `min_{‖d‖∞ ≤ r} ω(F̂ + Ĵ d)` and the criticality
//! measure built on it.

use nalgebra::{DMatrix, DVector};

use super::{solve_lp, LinearRow, LpProblem};
use crate::error::{Error, Result};
use crate::polyhedral::PolyhedralSpec;

/// An LP whose first `n_step` variables are the step `d`.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub lp: LpProblem,
    pub n_step: usize,
    pub constant: f64,
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub d: DVector<f64>,
    /// `ℓ̂(d)`, evaluated directly at the returned step.
    pub value: f64,
    /// `ℓ̂(0) − ℓ̂(d)`, computed termwise.
    pub decrease: f64,
    pub pivots: usize,
}

pub fn build_subproblem(
    spec: &PolyhedralSpec,
    f_hat: &DVector<f64>,
    j_hat: &DMatrix<f64>,
    radius_lp: f64,
) -> Result<Subproblem> {
    if !(radius_lp > 0.0) || !radius_lp.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "LP trust radius must be positive and finite, got {radius_lp}"
        )));
    }
    let block = spec.epigraph_block(f_hat, j_hat)?;
    let n = block.n_step;

    let mut objective = block.step_objective.clone();
    objective.extend_from_slice(&block.aux_objective);
    let mut lower = vec![-radius_lp; n];
    lower.extend_from_slice(&block.aux_lower);
    let mut upper = vec![radius_lp; n];
    upper.extend_from_slice(&block.aux_upper);

    let to_row = |row: &crate::polyhedral::BlockRow| LinearRow::new(row.entries.clone(), row.rhs);
    let lp = LpProblem {
        objective,
        ub_rows: block.ub_rows.iter().map(to_row).collect(),
        eq_rows: block.eq_rows.iter().map(to_row).collect(),
        lower,
        upper,
    };
    Ok(Subproblem {
        lp,
        n_step: n,
        constant: block.constant,
    })
}

/// Solves the subproblem and evaluates the model at the returned step.
pub fn solve_subproblem(
    spec: &PolyhedralSpec,
    f_hat: &DVector<f64>,
    j_hat: &DMatrix<f64>,
    radius_lp: f64,
) -> Result<SubproblemSolution> {
    let sub = build_subproblem(spec, f_hat, j_hat, radius_lp)?;
    let solution = solve_lp(&sub.lp)?;
    if !solution.is_optimal() {
        return Err(Error::LpFailure(solution.status));
    }
    // Clip round-off so the step respects the box exactly.
    let d = DVector::from_iterator(
        sub.n_step,
        solution.x[..sub.n_step]
            .iter()
            .map(|v| v.clamp(-radius_lp, radius_lp)),
    );
    let dz = j_hat * &d;
    let change = spec.eval_change(f_hat.as_slice(), dz.as_slice());
    let base = spec.eval(f_hat.as_slice())?;
    // The zero step is always feasible, so a positive change is LP round-off.
    let (d, change) = if change > 0.0 {
        (DVector::zeros(sub.n_step), 0.0)
    } else {
        (d, change)
    };
    Ok(SubproblemSolution {
        d,
        value: base + change,
        decrease: -change,
        pivots: solution.pivots,
    })
}

/// `Ψ̂(r) = φ̂ − min_{‖d‖∞ ≤ r} ℓ̂(d)`, never negative.
pub fn criticality(
    spec: &PolyhedralSpec,
    f_hat: &DVector<f64>,
    j_hat: &DMatrix<f64>,
    radius: f64,
) -> Result<f64> {
    Ok(solve_subproblem(spec, f_hat, j_hat, radius)?.decrease.max(0.0))
}
