use nalgebra::{DMatrix, DVector};

use super::CompositeProblem;
use crate::error::{Error, Result};
use crate::oracle::{ImageTarget, MapConstants, SmoothMap};
use crate::polyhedral::PolyhedralSpec;

/// `F(x) = (½‖X − Y‖², A x)` where `x = vec(X)` (column-major) and `A` stacks
/// the vertical differences `X[i+1, j] − X[i, j]` followed by the horizontal
/// differences `X[i, j+1] − X[i, j]`.
#[derive(Debug, Clone)]
pub struct TvMap {
    target: ImageTarget,
    /// `(plus, minus)` pixel indices of each difference row.
    differences: Vec<(usize, usize)>,
}

impl TvMap {
    pub fn new(image: &DMatrix<f64>) -> Result<Self> {
        if image.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("image entries must lie in [0, 1]".into()));
        }
        let (m, n) = image.shape();
        let idx = |i: usize, j: usize| j * m + i;
        let mut differences = Vec::with_capacity(m.saturating_sub(1) * n + m * n.saturating_sub(1));
        for j in 0..n {
            for i in 0..m.saturating_sub(1) {
                differences.push((idx(i + 1, j), idx(i, j)));
            }
        }
        for j in 0..n.saturating_sub(1) {
            for i in 0..m {
                differences.push((idx(i, j + 1), idx(i, j)));
            }
        }
        Ok(Self {
            target: ImageTarget {
                rows: m,
                cols: n,
                values: image.as_slice().to_vec(),
            },
            differences,
        })
    }

    pub fn n_differences(&self) -> usize {
        self.differences.len()
    }

    pub fn differences(&self) -> &[(usize, usize)] {
        &self.differences
    }
}

impl SmoothMap for TvMap {
    fn n(&self) -> usize {
        self.target.values.len()
    }

    fn p(&self) -> usize {
        1 + self.differences.len()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut f = DVector::zeros(self.p());
        f[0] = 0.5
            * x.iter()
                .zip(&self.target.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        for (r, &(plus, minus)) in self.differences.iter().enumerate() {
            f[1 + r] = x[plus] - x[minus];
        }
        f
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.p(), self.n());
        for (j, (a, b)) in x.iter().zip(&self.target.values).enumerate() {
            jac[(0, j)] = a - b;
        }
        for (r, &(plus, minus)) in self.differences.iter().enumerate() {
            jac[(1 + r, plus)] = 1.0;
            jac[(1 + r, minus)] = -1.0;
        }
        jac
    }

    fn curvature(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.n(), self.n()))
    }

    fn constants(&self) -> MapConstants {
        // ‖A‖² ≤ 8 for the anisotropic difference operator, and ‖X − Y‖ is
        // at most √(MN) on the unit box.
        MapConstants {
            l_f: Some((self.n() as f64 + 8.0).sqrt()),
            l_fprime: Some(1.0),
            beta: Some(1.0),
        }
    }

    fn image_target(&self) -> Option<&ImageTarget> {
        Some(&self.target)
    }
}

/// Anisotropic total variation `Σ |X[i+1,j] − X[i,j]| + Σ |X[i,j+1] − X[i,j]|`.
pub fn total_variation(image: &DMatrix<f64>) -> f64 {
    let (m, n) = image.shape();
    let mut tv = 0.0;
    for j in 0..n {
        for i in 0..m {
            if i + 1 < m {
                tv += (image[(i + 1, j)] - image[(i, j)]).abs();
            }
            if j + 1 < n {
                tv += (image[(i, j + 1)] - image[(i, j)]).abs();
            }
        }
    }
    tv
}

/// Denoising `½‖X − Y‖² + λ TV(X)` for the reference image `Y`, started
/// from the black image.
pub fn tv_reconstruction(image: &DMatrix<f64>, lambda: f64) -> Result<CompositeProblem> {
    let map = TvMap::new(image)?;
    let spec = PolyhedralSpec::composite_penalty(lambda, 0, map.n_differences())?;
    let n = map.n();
    Ok(CompositeProblem {
        name: "tv_reconstruction".into(),
        map: Box::new(map),
        spec,
        x0: DVector::zeros(n),
        known_optimum: None,
        constrained: false,
        region: Some((0.0, 1.0)),
    })
}

/// Piecewise-constant test image: background 0.2, a centered rectangle at
/// 0.8 and a centered disk at 0.5 on top of it.
pub fn synthetic_image(rows: usize, cols: usize) -> DMatrix<f64> {
    let (cy, cx) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
    let radius = rows.min(cols) as f64 / 6.0;
    DMatrix::from_fn(rows, cols, |i, j| {
        let (fi, fj) = (i as f64, j as f64);
        let in_rect = i >= rows / 4 && i < rows - rows / 4 && j >= cols / 4 && j < cols - cols / 4;
        if (fi - cy).hypot(fj - cx) <= radius {
            0.5
        } else if in_rect {
            0.8
        } else {
            0.2
        }
    })
}
