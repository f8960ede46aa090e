use nalgebra::{DMatrix, DVector};

use super::CompositeProblem;
use crate::error::{Error, Result};
use crate::oracle::{MapConstants, SmoothMap};
use crate::polyhedral::PolyhedralSpec;

/// `F(x, y) = (R(x, y), x − a, y − a²)` with the Rosenbrock function
/// `R(x, y) = (a − x)² + b(y − x²)²`.
#[derive(Debug, Clone)]
pub struct RosenbrockMap {
    pub a: f64,
    pub b: f64,
    region_radius: f64,
}

impl RosenbrockMap {
    pub fn rosenbrock(&self, x: f64, y: f64) -> f64 {
        (self.a - x).powi(2) + self.b * (y - x * x).powi(2)
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let r = y - x * x;
        (-2.0 * (self.a - x) - 4.0 * self.b * x * r, 2.0 * self.b * r)
    }
}

impl SmoothMap for RosenbrockMap {
    fn n(&self) -> usize {
        2
    }

    fn p(&self) -> usize {
        3
    }

    fn eval(&self, v: &DVector<f64>) -> DVector<f64> {
        let (x, y) = (v[0], v[1]);
        DVector::from_vec(vec![self.rosenbrock(x, y), x - self.a, y - self.a * self.a])
    }

    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let (gx, gy) = self.gradient(v[0], v[1]);
        DMatrix::from_row_slice(3, 2, &[gx, gy, 1.0, 0.0, 0.0, 1.0])
    }

    fn curvature(&self, v: &DVector<f64>) -> Option<DMatrix<f64>> {
        let (x, y) = (v[0], v[1]);
        let b = self.b;
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[2.0 - 4.0 * b * y + 12.0 * b * x * x, -4.0 * b * x, -4.0 * b * x, 2.0 * b],
        ))
    }

    fn constants(&self) -> MapConstants {
        // Crude bounds on the box |x|, |y| ≤ r: Gershgorin for the Hessian of
        // R (the only non-constant row) and termwise bounds for its gradient.
        let (a, b, r) = (self.a.abs(), self.b, self.region_radius);
        let gx = 2.0 * (a + r) + 4.0 * b * r * (r + r * r);
        let gy = 2.0 * b * (r + r * r);
        let h11 = 2.0 + 4.0 * b * r + 12.0 * b * r * r;
        let h12 = 4.0 * b * r;
        let hess = (h11 + h12).max(h12 + 2.0 * b);
        MapConstants {
            l_f: Some((1.0 + gx * gx + gy * gy).sqrt()),
            l_fprime: Some(hess),
            beta: Some(hess),
        }
    }
}

pub fn rosenbrock_l1(a: f64, b: f64, lambda: f64, x0: [f64; 2]) -> Result<CompositeProblem> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!("Rosenbrock b must be positive, got {b}")));
    }
    let region = x0[0].abs().max(x0[1].abs()).max(a.abs().max(a * a)).max(2.0);
    Ok(CompositeProblem {
        name: "rosenbrock_l1".into(),
        map: Box::new(RosenbrockMap {
            a,
            b,
            region_radius: region,
        }),
        spec: PolyhedralSpec::composite_penalty(lambda, 0, 2)?,
        x0: DVector::from_vec(x0.to_vec()),
        known_optimum: Some(DVector::from_vec(vec![a, a * a])),
        constrained: false,
        region: Some((-region, region)),
    })
}

/// `a = 1`, `b = 100`, `λ = 0.1`, started at `(−1.5, 0)`.
pub fn rosenbrock_l1_default() -> CompositeProblem {
    rosenbrock_l1(1.0, 100.0, 0.1, [-1.5, 0.0]).expect("default Rosenbrock problem is valid")
}
