use nalgebra::{DMatrix, DVector};

use super::CompositeProblem;
use crate::error::Result;
use crate::oracle::SmoothMap;
use crate::polyhedral::PolyhedralSpec;

/// Solution of Hock–Schittkowski problem 71 to seven digits.
pub const HS71_OPTIMUM: [f64; 4] = [1.0, 4.742_999_6, 3.821_150_0, 1.379_408_3];

/// `F(x) = (f(x), g(x), h(x))` for Hock–Schittkowski problem 71:
/// `f = x₁x₄(x₁+x₂+x₃) + x₃`,
/// `g = (25 − x₁x₂x₃x₄, 1 − x₁, …, 1 − x₄, x₁ − 5, …, x₄ − 5) ≤ 0`,
/// `h = Σ xᵢ² − 40 = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hs71Map;

impl SmoothMap for Hs71Map {
    fn n(&self) -> usize {
        4
    }

    fn p(&self) -> usize {
        11
    }

    fn eval(&self, v: &DVector<f64>) -> DVector<f64> {
        let (x1, x2, x3, x4) = (v[0], v[1], v[2], v[3]);
        let mut f = DVector::zeros(11);
        f[0] = x1 * x4 * (x1 + x2 + x3) + x3;
        f[1] = 25.0 - x1 * x2 * x3 * x4;
        for i in 0..4 {
            f[2 + i] = 1.0 - v[i];
            f[6 + i] = v[i] - 5.0;
        }
        f[10] = v.norm_squared() - 40.0;
        f
    }

    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let (x1, x2, x3, x4) = (v[0], v[1], v[2], v[3]);
        let mut jac = DMatrix::zeros(11, 4);
        let s = x1 + x2 + x3;
        jac[(0, 0)] = x4 * (s + x1);
        jac[(0, 1)] = x1 * x4;
        jac[(0, 2)] = x1 * x4 + 1.0;
        jac[(0, 3)] = x1 * s;
        jac[(1, 0)] = -x2 * x3 * x4;
        jac[(1, 1)] = -x1 * x3 * x4;
        jac[(1, 2)] = -x1 * x2 * x4;
        jac[(1, 3)] = -x1 * x2 * x3;
        for i in 0..4 {
            jac[(2 + i, i)] = -1.0;
            jac[(6 + i, i)] = 1.0;
            jac[(10, i)] = 2.0 * v[i];
        }
        jac
    }

    fn curvature(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        let (x1, x2, x3, x4) = (v[0], v[1], v[2], v[3]);
        let c = 2.0 * x1 + x2 + x3;
        Some(DMatrix::from_row_slice(
            4,
            4,
            &[
                2.0 * x4, x4, x4, c, //
                x4, 0.0, 0.0, x1, //
                x4, 0.0, 0.0, x1, //
                c, x1, x1, 0.0,
            ],
        ))
    }
}

/// Exact ℓ¹ penalty of HS71 with weight `nu`, started at `(1, 5, 5, 1)`.
pub fn hs71_penalty(nu: f64) -> Result<CompositeProblem> {
    Ok(CompositeProblem {
        name: "hs71_penalty".into(),
        map: Box::new(Hs71Map),
        spec: PolyhedralSpec::composite_penalty(nu, 9, 1)?,
        x0: DVector::from_vec(vec![1.0, 5.0, 5.0, 1.0]),
        known_optimum: Some(DVector::from_vec(HS71_OPTIMUM.to_vec())),
        constrained: true,
        region: None,
    })
}
