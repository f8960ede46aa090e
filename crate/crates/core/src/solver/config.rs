use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepMode {
    /// Take the Cauchy step as is.
    CauchyOnly,
    /// Try a regularized Newton candidate on the active linearization and
    /// keep it when it lowers the quadratic model.
    ImproveSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Curvature {
    /// `B = 0`: the quadratic model coincides with the linear one.
    Zero,
    /// `B` is the curvature the map provides (zero if it has none).
    Exact,
}

/// When noisy evaluations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvaluationPolicy {
    /// Noise is a function of the point: each point is evaluated once, an
    /// accepted trial evaluation becomes the next iterate's evaluation, and
    /// a rejected step keeps the current one.
    PerPoint,
    /// The iterate is re-evaluated with fresh noise at every iteration.
    PerIteration,
}

/// Parameters of the trust-region loop. Defaults follow the usual setting
/// `Δ^LP_0 = 1, Δ^LP_max = 10, Δ_0 = 1, ρ_u = 0.1, ρ_s = 0.5, κ_l = 0.1,
/// κ_u = 0.8, θ = 0.5, η = 0.1, τ = 0.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub delta_lp_0: f64,
    pub delta_lp_max: f64,
    pub delta_0: f64,
    pub rho_u: f64,
    pub rho_s: f64,
    pub kappa_l: f64,
    pub kappa_u: f64,
    pub theta_shrink: f64,
    pub eta: f64,
    pub tau: f64,
    /// Ratio stabilizer `ϑ ≥ 0`.
    pub vartheta: f64,
    pub max_iter: usize,
    pub tol_criticality: f64,
    pub tol_lp_radius: f64,
    pub step_mode: StepMode,
    pub curvature: Curvature,
    pub max_cauchy_backtracks: usize,
    pub evaluation: EvaluationPolicy,
    /// Also log the noise-free criticality (one extra LP per iteration).
    pub track_true_criticality: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta_lp_0: 1.0,
            delta_lp_max: 10.0,
            delta_0: 1.0,
            rho_u: 0.1,
            rho_s: 0.5,
            kappa_l: 0.1,
            kappa_u: 0.8,
            theta_shrink: 0.5,
            eta: 0.1,
            tau: 0.5,
            vartheta: 0.0,
            max_iter: 100,
            tol_criticality: 1e-6,
            tol_lp_radius: 1e-10,
            step_mode: StepMode::ImproveSmooth,
            curvature: Curvature::Exact,
            max_cauchy_backtracks: 60,
            evaluation: EvaluationPolicy::PerPoint,
            track_true_criticality: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(bool, &str); 11] = [
            (0.0 < self.rho_u && self.rho_u < self.rho_s && self.rho_s < 1.0, "0 < rho_u < rho_s < 1"),
            (
                0.0 < self.kappa_l && self.kappa_l <= self.kappa_u && self.kappa_u < 1.0,
                "0 < kappa_l <= kappa_u < 1",
            ),
            (0.0 < self.eta && self.eta < 1.0, "0 < eta < 1"),
            (0.0 < self.tau && self.tau < 1.0, "0 < tau < 1"),
            (self.theta_shrink > 0.0, "theta_shrink > 0"),
            (
                0.0 < self.delta_lp_0 && self.delta_lp_0 <= self.delta_lp_max,
                "0 < delta_lp_0 <= delta_lp_max",
            ),
            (self.delta_lp_max >= 1.0 && self.delta_lp_max.is_finite(), "delta_lp_max >= 1"),
            (self.delta_0 > 0.0 && self.delta_0.is_finite(), "delta_0 > 0"),
            (self.vartheta >= 0.0 && self.vartheta.is_finite(), "vartheta >= 0"),
            (self.tol_criticality >= 0.0, "tol_criticality >= 0"),
            (self.tol_lp_radius >= 0.0, "tol_lp_radius >= 0"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::InvalidParameter(format!("solver config violates {what}")));
            }
        }
        Ok(())
    }
}
