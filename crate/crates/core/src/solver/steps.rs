//! The pieces of one iteration: local models, Cauchy search, the improved
//! step, the stabilized ratio and the radius update.

use nalgebra::{DMatrix, DVector};

use super::config::{SolverConfig, StepMode};
use crate::error::{Error, Result};
use crate::polyhedral::PolyhedralSpec;

/// The models `ℓ̂(d) = ω(F̂ + Ĵd)` and `q̂(d) = ℓ̂(d) + ½⟨d, B d⟩` at the
/// current iterate. A missing curvature means `B = 0`.
#[derive(Debug, Clone, Copy)]
pub struct LocalModel<'a> {
    pub spec: &'a PolyhedralSpec,
    pub f_hat: &'a DVector<f64>,
    pub j_hat: &'a DMatrix<f64>,
    pub curvature: Option<&'a DMatrix<f64>>,
}

impl<'a> LocalModel<'a> {
    pub fn new(
        spec: &'a PolyhedralSpec,
        f_hat: &'a DVector<f64>,
        j_hat: &'a DMatrix<f64>,
        curvature: Option<&'a DMatrix<f64>>,
    ) -> Self {
        Self {
            spec,
            f_hat,
            j_hat,
            curvature,
        }
    }

    pub fn n(&self) -> usize {
        self.j_hat.ncols()
    }

    /// `φ̂(x) = ℓ̂(0) = q̂(0)`.
    pub fn phi_hat(&self) -> f64 {
        self.spec.eval_unchecked(self.f_hat.as_slice())
    }

    pub fn linear(&self, d: &DVector<f64>) -> f64 {
        let z = self.f_hat + self.j_hat * d;
        self.spec.eval_unchecked(z.as_slice())
    }

    pub fn quadratic(&self, d: &DVector<f64>) -> f64 {
        self.linear(d) + self.curvature_term(d)
    }

    /// `½⟨d, B d⟩`.
    pub fn curvature_term(&self, d: &DVector<f64>) -> f64 {
        self.curvature.map_or(0.0, |b| 0.5 * d.dot(&(b * d)))
    }

    /// `ℓ̂(0) − ℓ̂(d)`, free of cancellation against `φ̂`.
    pub fn linear_decrease(&self, d: &DVector<f64>) -> f64 {
        let dz = self.j_hat * d;
        self.linear_decrease_from(&dz)
    }

    fn linear_decrease_from(&self, dz: &DVector<f64>) -> f64 {
        -self.spec.eval_change(self.f_hat.as_slice(), dz.as_slice())
    }

    /// `q̂(0) − q̂(d)`.
    pub fn quadratic_decrease(&self, d: &DVector<f64>) -> f64 {
        self.linear_decrease(d) - self.curvature_term(d)
    }
}

/// Backtracks `α` from `min(1, Δ/‖d_LP‖₂)` by factors `τ` until
/// `q̂(0) − q̂(α d_LP) ≥ η [ℓ̂(0) − ℓ̂(α d_LP)]`.
pub fn cauchy_search(
    model: &LocalModel,
    d_lp: &DVector<f64>,
    delta: f64,
    config: &SolverConfig,
) -> Result<(f64, DVector<f64>)> {
    let norm = d_lp.norm();
    if norm == 0.0 {
        return Ok((1.0, DVector::zeros(d_lp.len())));
    }
    let mut alpha = f64::min(1.0, delta / norm);
    let jd = model.j_hat * d_lp;
    let bd = model.curvature.map(|b| d_lp.dot(&(b * d_lp)));
    for _ in 0..=config.max_cauchy_backtracks {
        let linear = model.linear_decrease_from(&(&jd * alpha));
        let quadratic = linear - bd.map_or(0.0, |v| 0.5 * alpha * alpha * v);
        if quadratic >= config.eta * linear {
            return Ok((alpha, d_lp * alpha));
        }
        alpha *= config.tau;
    }
    Err(Error::BacktrackLimit(config.max_cauchy_backtracks))
}

/// A step `d` with `‖d‖₂ ≤ Δ` and `q̂(d) ≤ q̂(d_C)`.
///
/// In [`StepMode::ImproveSmooth`] the objective is frozen on the affine
/// piece active at `d_C` (gradient `g = Ĵᵀw` for the active weights `w`), a
/// regularized Newton point `d_N = −(B + λI)⁻¹ g` is formed, and `q̂` is
/// searched on the segment from `d_C` towards `d_N`, cut at the trust-region
/// boundary. The best point found replaces `d_C` only if it is no worse.
pub fn improve_step(
    model: &LocalModel,
    d_c: &DVector<f64>,
    delta: f64,
    mode: StepMode,
) -> DVector<f64> {
    if mode == StepMode::CauchyOnly {
        return d_c.clone();
    }
    let Some(newton) = newton_point(model, d_c) else {
        return d_c.clone();
    };
    let direction = &newton - d_c;
    if direction.norm() == 0.0 {
        return d_c.clone();
    }
    let t_max = boundary_step(d_c, &direction, delta).min(1.0);
    if !(t_max > 0.0) {
        return d_c.clone();
    }

    let q = |t: f64| model.quadratic(&(d_c + &direction * t));
    let q_c = model.quadratic(d_c);

    // Coarse scan, then golden-section refinement around the best node.
    let nodes = 16;
    let mut best = (0.0, q_c);
    for i in 1..=nodes {
        let t = t_max * i as f64 / nodes as f64;
        let v = q(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    let h = t_max / nodes as f64;
    let (mut lo, mut hi) = ((best.0 - h).max(0.0), (best.0 + h).min(t_max));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut qa, mut qb) = (q(a), q(b));
    for _ in 0..40 {
        if qa <= qb {
            hi = b;
            b = a;
            qb = qa;
            a = hi - ratio * (hi - lo);
            qa = q(a);
        } else {
            lo = a;
            a = b;
            qa = qb;
            b = lo + ratio * (hi - lo);
            qb = q(b);
        }
    }
    for (t, v) in [(a, qa), (b, qb)] {
        if v < best.1 {
            best = (t, v);
        }
    }

    if best.0 > 0.0 && best.1 <= q_c {
        let d = d_c + &direction * best.0;
        let norm = d.norm();
        if norm <= delta {
            return d;
        }
        // Round-off on the boundary: pull back onto the ball and recheck.
        let scaled = d * (delta / norm);
        if model.quadratic(&scaled) <= q_c {
            return scaled;
        }
    }
    d_c.clone()
}

fn newton_point(model: &LocalModel, d_c: &DVector<f64>) -> Option<DVector<f64>> {
    let n = model.n();
    let z = model.f_hat + model.j_hat * d_c;
    let scale = 1.0 + z.amax();
    let w = DVector::from_vec(model.spec.active_weights(z.as_slice(), 1e-10 * scale));
    let g = model.j_hat.tr_mul(&w);

    let b = model
        .curvature
        .cloned()
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    let mut shift = f64::max(0.0, 1e-8 - smallest_eigenvalue_bound(&b));
    for _ in 0..20 {
        let mut shifted = b.clone();
        for i in 0..n {
            shifted[(i, i)] += shift;
        }
        if let Some(chol) = shifted.cholesky() {
            let d = -chol.solve(&g);
            return d.iter().all(|v| v.is_finite()).then_some(d);
        }
        shift = (shift * 10.0).max(1e-8);
    }
    None
}

/// Exact smallest eigenvalue for small matrices, Gershgorin bound otherwise.
fn smallest_eigenvalue_bound(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= 200 {
        return b.clone().symmetric_eigenvalues().min();
    }
    (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)].abs()).sum();
            b[(i, i)] - off
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest `t ≥ 0` with `‖p + t v‖₂ ≤ Δ`, assuming `‖p‖₂ ≤ Δ`.
fn boundary_step(p: &DVector<f64>, v: &DVector<f64>, delta: f64) -> f64 {
    let a = v.norm_squared();
    let b = 2.0 * p.dot(v);
    let c = (p.norm_squared() - delta * delta).min(0.0);
    let disc = (b * b - 4.0 * a * c).max(0.0);
    // Numerically stable root of a t² + b t + c = 0 with t ≥ 0.
    if b >= 0.0 {
        -2.0 * c / (b + disc.sqrt()).max(f64::MIN_POSITIVE)
    } else {
        (-b + disc.sqrt()) / (2.0 * a)
    }
}

/// `(φ̂(x) − φ̂(x+d) + ϑ) / (q̂(0) − q̂(d) + ϑ)`, or `None` when the
/// denominator is not positive.
pub fn stabilized_ratio(phi_hat: f64, phi_hat_trial: f64, model_decrease: f64, vartheta: f64) -> Option<f64> {
    let denominator = model_decrease + vartheta;
    if denominator > 0.0 {
        Some((phi_hat - phi_hat_trial + vartheta) / denominator)
    } else {
        None
    }
}

/// Radii for the next iteration: `(Δ_{k+1}, Δ^LP_{k+1})`.
pub fn update_radii(
    config: &SolverConfig,
    delta: f64,
    delta_lp: f64,
    rho_hat: Option<f64>,
    alpha: f64,
    step_norm_2: f64,
    step_norm_lp: f64,
) -> (f64, f64) {
    let rho = rho_hat.unwrap_or(f64::NEG_INFINITY);
    let delta_lp_next = if rho >= config.rho_u {
        if alpha == 1.0 {
            (2.0 * delta_lp).min(config.delta_lp_max)
        } else {
            delta_lp
        }
    } else {
        (config.theta_shrink * step_norm_lp).min(delta_lp)
    };
    let delta_next = if rho >= config.rho_s {
        2.0 * delta
    } else {
        (0.5 * delta).min(config.kappa_u * delta).max(config.kappa_l * step_norm_2)
    };
    (delta_next, delta_lp_next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model<'a>(f: &'a DVector<f64>, j: &'a DMatrix<f64>, b: Option<&'a DMatrix<f64>>) -> LocalModel<'a> {
        LocalModel::new(&PolyhedralSpec::Identity, f, j, b)
    }

    #[test]
    fn models_agree_at_zero() {
        let f = DVector::from_vec(vec![2.5]);
        let j = DMatrix::from_row_slice(1, 2, &[1.0, -3.0]);
        let b = DMatrix::identity(2, 2);
        let m = identity_model(&f, &j, Some(&b));
        let zero = DVector::zeros(2);
        assert_eq!(m.linear(&zero), 2.5);
        assert_eq!(m.quadratic(&zero), 2.5);
        assert_eq!(m.phi_hat(), 2.5);
    }

    #[test]
    fn cauchy_with_zero_curvature_takes_the_first_trial() {
        let f = DVector::from_vec(vec![0.0]);
        let j = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let m = identity_model(&f, &j, None);
        let d_lp = DVector::from_vec(vec![-3.0, -4.0]);
        let (alpha, d_c) = cauchy_search(&m, &d_lp, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(alpha, 0.2);
        assert!((d_c.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cauchy_with_zero_lp_step() {
        let f = DVector::from_vec(vec![0.0]);
        let j = DMatrix::zeros(1, 2);
        let m = identity_model(&f, &j, None);
        let (alpha, d_c) = cauchy_search(&m, &DVector::zeros(2), 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(alpha, 1.0);
        assert_eq!(d_c, DVector::zeros(2));
    }

    #[test]
    fn cauchy_backtracking_by_hand() {
        // ℓ̂ decrease α, curvature term ½·20·α² = 10α²: the test
        // α − 10α² ≥ 0.1α needs α ≤ 0.09, first met at α = 1/16.
        let f = DVector::from_vec(vec![0.0]);
        let j = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let b = DMatrix::from_row_slice(1, 1, &[20.0]);
        let m = identity_model(&f, &j, Some(&b));
        let d_lp = DVector::from_vec(vec![1.0]);
        let (alpha, _) = cauchy_search(&m, &d_lp, 10.0, &SolverConfig::default()).unwrap();
        let mut brute = 1.0;
        while brute - 10.0 * brute * brute < 0.1 * brute {
            brute *= 0.5;
        }
        assert_eq!(alpha, brute);
        assert_eq!(alpha, 0.0625);
    }

    #[test]
    fn backtrack_limit_is_reported() {
        let f = DVector::from_vec(vec![0.0]);
        let j = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1e30]);
        let m = identity_model(&f, &j, Some(&b));
        let config = SolverConfig {
            max_cauchy_backtracks: 5,
            ..SolverConfig::default()
        };
        let err = cauchy_search(&m, &DVector::from_vec(vec![1.0]), 1.0, &config).unwrap_err();
        assert_eq!(err, Error::BacktrackLimit(5));
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(stabilized_ratio(3.0, 2.0, 1.0, 0.0), Some(1.0));
        assert_eq!(stabilized_ratio(3.0, 2.0, 1.0, 5.0), Some(1.0));
        assert_eq!(stabilized_ratio(3.0, 3.0, 0.0, 0.7), Some(1.0));
        assert_eq!(stabilized_ratio(3.0, 3.0, 0.0, 0.0), None);
    }

    #[test]
    fn radius_update_examples() {
        let config = SolverConfig::default();
        assert_eq!(update_radii(&config, 1.0, 1.0, Some(0.9), 1.0, 0.5, 0.5), (2.0, 2.0));
        assert_eq!(update_radii(&config, 1.0, 1.0, Some(0.9), 0.5, 0.5, 0.5), (2.0, 1.0));
        let (_, lp) = update_radii(&config, 1.0, 1.0, Some(0.0), 1.0, 0.1, 0.1);
        assert_eq!(lp, 0.05);
        let (d, lp) = update_radii(&config, 1.0, 1.0, Some(0.3), 1.0, 1.0, 1.0);
        assert_eq!(lp, 2.0);
        assert!(d <= config.kappa_u * 1.0 && d >= config.kappa_l * 1.0);
        assert_eq!(update_radii(&config, 1.0, 8.0, Some(0.9), 1.0, 1.0, 1.0).1, 10.0);
    }

    #[test]
    fn improve_step_respects_contract() {
        let spec = PolyhedralSpec::composite_penalty(0.01, 0, 2).unwrap();
        let f = DVector::from_vec(vec![5.0, 3.0, -1.0]);
        let j = DMatrix::from_row_slice(3, 2, &[3.0, -1.0, 1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let m = LocalModel::new(&spec, &f, &j, Some(&b));
        let d_c = DVector::from_vec(vec![-0.1, 0.05]);
        for delta in [0.2, 1.0, 10.0] {
            let d = improve_step(&m, &d_c, delta, StepMode::ImproveSmooth);
            assert!(d.norm() <= delta);
            assert!(m.quadratic(&d) <= m.quadratic(&d_c));
        }
        assert_eq!(improve_step(&m, &d_c, 1.0, StepMode::CauchyOnly), d_c);
    }
}
