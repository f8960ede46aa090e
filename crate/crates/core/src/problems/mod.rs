//! Benchmark problems: a smooth map paired with a polyhedral outer function.

mod hs71;
mod quadratic;
mod rosenbrock;
mod tv;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use hs71::{hs71_penalty, Hs71Map, HS71_OPTIMUM};
pub use quadratic::{quadratic_l1, quadratic_l1_default, QuadraticMap};
pub use rosenbrock::{rosenbrock_l1, rosenbrock_l1_default, RosenbrockMap};
pub use tv::{synthetic_image, total_variation, tv_reconstruction, TvMap};

use crate::oracle::{MapConstants, SmoothMap};
use crate::polyhedral::PolyhedralSpec;

/// `min_x ω(F(x))` together with its start point and known facts.
pub struct CompositeProblem {
    pub name: String,
    pub map: Box<dyn SmoothMap>,
    pub spec: PolyhedralSpec,
    pub x0: DVector<f64>,
    pub known_optimum: Option<DVector<f64>>,
    /// Whether the penalized residuals are constraints (as opposed to a
    /// regularizer), which makes a feasibility residual meaningful.
    pub constrained: bool,
    /// Coordinate box `[lo, hi]ⁿ` on which the map constants hold.
    pub region: Option<(f64, f64)>,
}

/// Constants of the composite objective used by the convergence theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub l_omega: f64,
    pub map: MapConstants,
}

impl CompositeProblem {
    pub fn n(&self) -> usize {
        self.map.n()
    }

    /// Noise-free objective `φ(x) = ω(F(x))`.
    pub fn phi(&self, x: &DVector<f64>) -> f64 {
        self.spec.eval_unchecked(self.map.eval(x).as_slice())
    }

    pub fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            l_omega: self.spec.lipschitz(),
            map: self.map.constants(),
        }
    }

    /// `max(‖g(x)₊‖∞, ‖h(x)‖∞)` for constrained problems.
    pub fn feasibility_residual(&self, x: &DVector<f64>) -> Option<f64> {
        if !self.constrained {
            return None;
        }
        let PolyhedralSpec::CompositePenalty { n_ineq, .. } = self.spec else {
            return None;
        };
        let f = self.map.eval(x);
        let worst = f
            .iter()
            .skip(1)
            .enumerate()
            .map(|(i, &v)| if i < n_ineq { v.max(0.0) } else { v.abs() })
            .fold(0.0, f64::max);
        Some(worst)
    }

    pub fn distance_to_optimum(&self, x: &DVector<f64>) -> Option<f64> {
        self.known_optimum.as_ref().map(|opt| (x - opt).norm())
    }
}

/// Largest ratios observed by sampling the declared region.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantAudit {
    pub max_jacobian_norm: f64,
    pub max_jacobian_lipschitz: f64,
    pub max_curvature: f64,
}

impl ConstantAudit {
    /// Whether every sampled ratio stays within the declared constants.
    pub fn within(&self, constants: &MapConstants) -> bool {
        let ok = |bound: Option<f64>, seen: f64| bound.is_none_or(|b| seen <= b * (1.0 + 1e-12));
        ok(constants.l_f, self.max_jacobian_norm)
            && ok(constants.l_fprime, self.max_jacobian_lipschitz)
            && ok(constants.beta, self.max_curvature)
    }
}

/// Samples pairs of points in the problem region and records the largest
/// Jacobian norm, Jacobian difference quotient and curvature ratio.
pub fn audit_constants<R: Rng + ?Sized>(problem: &CompositeProblem, samples: usize, rng: &mut R) -> ConstantAudit {
    let Some((lo, hi)) = problem.region else {
        return ConstantAudit::default();
    };
    let n = problem.n();
    let map = problem.map.as_ref();
    let mut audit = ConstantAudit::default();
    let point = |rng: &mut R| DVector::from_fn(n, |_, _| rng.random_range(lo..=hi));
    for _ in 0..samples {
        let x = point(rng);
        // Nearby pairs probe the local Lipschitz ratio better than far ones.
        let y = if rng.random_bool(0.5) {
            point(rng)
        } else {
            let scale = (hi - lo) * 1e-3;
            DVector::from_fn(n, |i, _| (x[i] + rng.random_range(-scale..=scale)).clamp(lo, hi))
        };
        let jx = map.jacobian(&x);
        let jy = map.jacobian(&y);
        audit.max_jacobian_norm = audit.max_jacobian_norm.max(spectral_norm(&jx));
        let dist = (&x - &y).norm();
        if dist > 0.0 {
            audit.max_jacobian_lipschitz = audit.max_jacobian_lipschitz.max(spectral_norm(&(jx - jy)) / dist);
        }
        if let Some(b) = map.curvature(&x) {
            let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
            let dd = d.norm_squared();
            if dd > 0.0 {
                audit.max_curvature = audit.max_curvature.max(d.dot(&(&b * &d)) / dd);
            }
        }
    }
    audit
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}
