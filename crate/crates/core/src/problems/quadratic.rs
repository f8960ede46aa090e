use nalgebra::{DMatrix, DVector};

use super::CompositeProblem;
use crate::error::{Error, Result};
use crate::oracle::{MapConstants, SmoothMap};
use crate::polyhedral::PolyhedralSpec;

/// `F(x) = (½⟨x, D x⟩, x)` for a positive diagonal `D`.
#[derive(Debug, Clone)]
pub struct QuadraticMap {
    diag: DVector<f64>,
    /// Constants are stated on the box `‖x‖∞ ≤ region_radius`.
    region_radius: f64,
}

impl QuadraticMap {
    pub fn new(diag: Vec<f64>, region_radius: f64) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("diagonal entries must be positive".into()));
        }
        Ok(Self {
            diag: DVector::from_vec(diag),
            region_radius,
        })
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }
}

impl SmoothMap for QuadraticMap {
    fn n(&self) -> usize {
        self.diag.len()
    }

    fn p(&self) -> usize {
        1 + self.diag.len()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let mut f = DVector::zeros(1 + n);
        f[0] = 0.5 * x.iter().zip(self.diag.iter()).map(|(xi, di)| di * xi * xi).sum::<f64>();
        f.rows_mut(1, n).copy_from(x);
        f
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        let mut jac = DMatrix::zeros(1 + n, n);
        for i in 0..n {
            jac[(0, i)] = self.diag[i] * x[i];
            jac[(1 + i, i)] = 1.0;
        }
        jac
    }

    fn curvature(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&self.diag))
    }

    fn constants(&self) -> MapConstants {
        // F′(x)ᵀF′(x) = I + (Dx)(Dx)ᵀ, so ‖F′(x)‖ = √(1 + ‖Dx‖²).
        let max_d = self.diag.max();
        MapConstants {
            l_f: Some((1.0 + (self.region_radius * self.diag.norm()).powi(2)).sqrt()),
            l_fprime: Some(max_d),
            beta: Some(max_d),
        }
    }
}

/// `½⟨x, Dx⟩ + λ‖x‖₁` started from `x0`.
pub fn quadratic_l1(diag: Vec<f64>, lambda: f64, x0: Vec<f64>) -> Result<CompositeProblem> {
    let n = diag.len();
    crate::error::check_dim(n, x0.len(), "quadratic start point")?;
    let x0 = DVector::from_vec(x0);
    let region = x0.amax().max(1.0);
    let map = QuadraticMap::new(diag, region)?;
    Ok(CompositeProblem {
        name: "quadratic_l1".into(),
        map: Box::new(map),
        spec: PolyhedralSpec::composite_penalty(lambda, 0, n)?,
        x0,
        known_optimum: Some(DVector::zeros(n)),
        constrained: false,
        region: Some((-region, region)),
    })
}

/// Eight variables, `D = diag(10⁻⁵, 10⁻⁴·⁷⁵, …, 10⁻³·²⁵)`, `λ = 10⁻²`,
/// started at `(1000, 0, …, 0)`.
pub fn quadratic_l1_default() -> CompositeProblem {
    let n = 8;
    let diag = (0..n).map(|i| 10f64.powf(-5.0 + 0.25 * i as f64)).collect();
    let mut x0 = vec![0.0; n];
    x0[0] = 1000.0;
    quadratic_l1(diag, 1e-2, x0).expect("default quadratic problem is valid")
}
