//! Convex polyhedral outer functions `ω : R^p → R`.
//!
//! Three shapes are supported. [`PolyhedralSpec::CompositePenalty`] is the
//! workhorse: an exact ℓ¹ penalty `z₀ + ν(Σ max(z_ineq, 0) + Σ |z_eq|)` that
//! covers penalty formulations of constrained problems as well as LASSO and
//! total-variation style regularizers (with `n_ineq = 0`).
//! [`PolyhedralSpec::MaxAffine`] is a general finite maximum of affine pieces
//! and [`PolyhedralSpec::Identity`] turns the composite problem into a smooth
//! one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// One affine piece `a·z + b` of a max-affine function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PolyhedralSpec {
    /// `ω(z) = z₀` with `p = 1`.
    Identity,
    /// `ω(z) = max_i (a_i·z + b_i)`.
    MaxAffine { pieces: Vec<AffinePiece> },
    /// `ω(z₀, y, w) = z₀ + ν(Σ max(y_i, 0) + Σ |w_j|)`.
    CompositePenalty { nu: f64, n_ineq: usize, n_eq: usize },
}

impl PolyhedralSpec {
    pub fn composite_penalty(nu: f64, n_ineq: usize, n_eq: usize) -> Result<Self> {
        let spec = PolyhedralSpec::CompositePenalty { nu, n_ineq, n_eq };
        spec.validate()?;
        Ok(spec)
    }

    pub fn max_affine(pieces: Vec<AffinePiece>) -> Result<Self> {
        let spec = PolyhedralSpec::MaxAffine { pieces };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolyhedralSpec::Identity => Ok(()),
            PolyhedralSpec::MaxAffine { pieces } => {
                let first = pieces
                    .first()
                    .ok_or_else(|| Error::InvalidParameter("max-affine needs a piece".into()))?;
                if first.a.is_empty() {
                    return Err(Error::InvalidParameter(
                        "max-affine pieces need a non-empty slope".into(),
                    ));
                }
                for piece in pieces {
                    check_dim(first.a.len(), piece.a.len(), "max-affine piece slope")?;
                    if !piece.b.is_finite() || piece.a.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidParameter("non-finite affine piece".into()));
                    }
                }
                Ok(())
            }
            PolyhedralSpec::CompositePenalty { nu, .. } => {
                if *nu > 0.0 && nu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "penalty weight must be positive, got {nu}"
                    )))
                }
            }
        }
    }

    /// Input dimension `p`.
    pub fn dim(&self) -> usize {
        match self {
            PolyhedralSpec::Identity => 1,
            PolyhedralSpec::MaxAffine { pieces } => pieces.first().map_or(0, |p| p.a.len()),
            PolyhedralSpec::CompositePenalty { n_ineq, n_eq, .. } => 1 + n_ineq + n_eq,
        }
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len(), "omega argument")?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: &[f64]) -> f64 {
        match self {
            PolyhedralSpec::Identity => z[0],
            PolyhedralSpec::MaxAffine { pieces } => pieces
                .iter()
                .map(|p| dot(&p.a, z) + p.b)
                .fold(f64::NEG_INFINITY, f64::max),
            PolyhedralSpec::CompositePenalty { nu, n_ineq, .. } => {
                let (ineq, eq) = z[1..].split_at(*n_ineq);
                let penalty: f64 = ineq.iter().map(|v| v.max(0.0)).sum::<f64>()
                    + eq.iter().map(|v| v.abs()).sum::<f64>();
                z[0] + nu * penalty
            }
        }
    }

    /// `ω(z + dz) − ω(z)`, evaluated term by term so that small changes are
    /// not swamped by cancellation against a large `ω(z)`.
    pub fn eval_change(&self, z: &[f64], dz: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), dz.len());
        match self {
            PolyhedralSpec::Identity => dz[0],
            PolyhedralSpec::MaxAffine { .. } => {
                let moved: Vec<f64> = z.iter().zip(dz).map(|(a, b)| a + b).collect();
                self.eval_unchecked(&moved) - self.eval_unchecked(z)
            }
            PolyhedralSpec::CompositePenalty { nu, n_ineq, .. } => {
                let mut penalty = 0.0;
                for (i, (&zi, &dzi)) in z[1..].iter().zip(&dz[1..]).enumerate() {
                    penalty += if i < *n_ineq {
                        positive_part_change(zi, dzi)
                    } else {
                        abs_change(zi, dzi)
                    };
                }
                dz[0] + nu * penalty
            }
        }
    }

    /// Lipschitz constant of `ω` with respect to the Euclidean norm.
    ///
    /// For the composite penalty this is `√(1 + ν²m)`, `m = n_ineq + n_eq`,
    /// which is tight for pure equality penalties and an upper bound when
    /// positive-part clipping is present.
    pub fn lipschitz(&self) -> f64 {
        match self {
            PolyhedralSpec::Identity => 1.0,
            PolyhedralSpec::MaxAffine { pieces } => pieces
                .iter()
                .map(|p| dot(&p.a, &p.a).sqrt())
                .fold(0.0, f64::max),
            PolyhedralSpec::CompositePenalty { nu, n_ineq, n_eq } => {
                let m = (n_ineq + n_eq) as f64;
                (1.0 + nu * nu * m).sqrt()
            }
        }
    }

    /// A subgradient of `ω` at `z`, picking the active affine piece.
    ///
    /// Kinks within `tol` of zero get weight zero, which keeps the selected
    /// linearization flat across them.
    pub fn active_weights(&self, z: &[f64], tol: f64) -> Vec<f64> {
        match self {
            PolyhedralSpec::Identity => vec![1.0],
            PolyhedralSpec::MaxAffine { pieces } => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (i, p) in pieces.iter().enumerate() {
                    let v = dot(&p.a, z) + p.b;
                    if v > best_val {
                        best_val = v;
                        best = i;
                    }
                }
                pieces[best].a.clone()
            }
            PolyhedralSpec::CompositePenalty { nu, n_ineq, .. } => {
                let mut w = Vec::with_capacity(z.len());
                w.push(1.0);
                for (i, &zi) in z[1..].iter().enumerate() {
                    let weight = if i < *n_ineq {
                        if zi > tol {
                            *nu
                        } else {
                            0.0
                        }
                    } else if zi > tol {
                        *nu
                    } else if zi < -tol {
                        -*nu
                    } else {
                        0.0
                    };
                    w.push(weight);
                }
                w
            }
        }
    }

    /// Linear-programming encoding of `min_d ω(c + J d)`.
    ///
    /// The returned block uses the variable layout `(d, aux)`; constraints on
    /// `d` itself (such as a trust region) are left to the caller.
    pub fn epigraph_block(&self, c: &DVector<f64>, jac: &DMatrix<f64>) -> Result<LinearObjectiveBlock> {
        let p = self.dim();
        check_dim(p, c.len(), "epigraph offset")?;
        check_dim(p, jac.nrows(), "epigraph jacobian rows")?;
        let n = jac.ncols();
        let mut block = LinearObjectiveBlock::new(n);
        match self {
            PolyhedralSpec::Identity => {
                block.step_objective = jac.row(0).iter().copied().collect();
                block.constant = c[0];
            }
            PolyhedralSpec::MaxAffine { pieces } => {
                let t = block.push_aux(f64::NEG_INFINITY, f64::INFINITY, 1.0);
                for piece in pieces {
                    // a·(c + J d) + b ≤ t
                    let slope = DVector::from_column_slice(&piece.a);
                    let combined = jac.tr_mul(&slope);
                    let mut entries: Vec<(usize, f64)> = combined
                        .iter()
                        .enumerate()
                        .filter_map(|(j, &v)| (v != 0.0).then_some((j, v)))
                        .collect();
                    entries.push((t, -1.0));
                    block.ub_rows.push(BlockRow {
                        entries,
                        rhs: -(slope.dot(c) + piece.b),
                    });
                }
            }
            PolyhedralSpec::CompositePenalty { nu, n_ineq, n_eq } => {
                let mut rows = sparse_rows(jac);
                block.step_objective = jac.row(0).iter().copied().collect();
                block.constant = c[0];
                for i in 0..*n_ineq {
                    let z_row = 1 + i;
                    // (c + J d)_i ≤ s_i
                    let s = block.push_aux(0.0, f64::INFINITY, *nu);
                    let mut entries = std::mem::take(&mut rows[z_row]);
                    entries.push((s, -1.0));
                    block.ub_rows.push(BlockRow {
                        entries,
                        rhs: -c[z_row],
                    });
                }
                for j in 0..*n_eq {
                    let z_row = 1 + n_ineq + j;
                    // (c + J d)_j = p_j − q_j
                    let pos = block.push_aux(0.0, f64::INFINITY, *nu);
                    let neg = block.push_aux(0.0, f64::INFINITY, *nu);
                    let mut entries = std::mem::take(&mut rows[z_row]);
                    entries.push((pos, -1.0));
                    entries.push((neg, 1.0));
                    block.eq_rows.push(BlockRow {
                        entries,
                        rhs: -c[z_row],
                    });
                }
            }
        }
        Ok(block)
    }
}

/// Nonzeros of each row, collected in one pass over the column-major storage.
fn sparse_rows(jac: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); jac.nrows()];
    for (j, column) in jac.column_iter().enumerate() {
        for (i, &v) in column.iter().enumerate() {
            if v != 0.0 {
                rows[i].push((j, v));
            }
        }
    }
    rows
}

/// A sparse linear row over the `(d, aux)` variables of an epigraph block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Auxiliary variables, constraints and a linear objective whose minimum over
/// the auxiliaries equals `ω(c + J d)` for every fixed `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjectiveBlock {
    pub n_step: usize,
    pub step_objective: Vec<f64>,
    pub aux_objective: Vec<f64>,
    pub aux_lower: Vec<f64>,
    pub aux_upper: Vec<f64>,
    pub constant: f64,
    /// `entries · (d, aux) ≤ rhs`
    pub ub_rows: Vec<BlockRow>,
    /// `entries · (d, aux) = rhs`
    pub eq_rows: Vec<BlockRow>,
}

impl LinearObjectiveBlock {
    fn new(n_step: usize) -> Self {
        Self {
            n_step,
            step_objective: vec![0.0; n_step],
            aux_objective: Vec::new(),
            aux_lower: Vec::new(),
            aux_upper: Vec::new(),
            constant: 0.0,
            ub_rows: Vec::new(),
            eq_rows: Vec::new(),
        }
    }

    fn push_aux(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.aux_objective.push(cost);
        self.aux_lower.push(lower);
        self.aux_upper.push(upper);
        self.n_step + self.aux_objective.len() - 1
    }

    pub fn n_aux(&self) -> usize {
        self.aux_objective.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n_step + self.n_aux()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn abs_change(z: f64, dz: f64) -> f64 {
    let moved = z + dz;
    if z >= 0.0 && moved >= 0.0 {
        dz
    } else if z <= 0.0 && moved <= 0.0 {
        -dz
    } else {
        moved.abs() - z.abs()
    }
}

fn positive_part_change(z: f64, dz: f64) -> f64 {
    let moved = z + dz;
    if z >= 0.0 && moved >= 0.0 {
        dz
    } else if z <= 0.0 && moved <= 0.0 {
        0.0
    } else {
        moved.max(0.0) - z.max(0.0)
    }
}
