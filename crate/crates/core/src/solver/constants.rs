//! Constants of the convergence theory: model error bounds, the required
//! stabilization and the critical region.

use serde::{Deserialize, Serialize};

use super::config::SolverConfig;
use crate::error::{Error, Result};
use crate::problems::ProblemConstants;

/// `M₀ = 2L^ω ε_F`, `M₁ = L^ω ε_F′`, `M₂ = L^ω L^F′ + β/2`,
/// `L^ℓ = γ L^ω (L^F + ε_F′)` and `γ = √n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConstants {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub l_ell: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl NoiseConstants {
    /// Requires the map to declare `L^F`, `L^F′` and `β`.
    pub fn new(problem: &ProblemConstants, eps_f: f64, eps_fprime: f64, n: usize) -> Result<Self> {
        let missing = |what: &str| Error::InvalidParameter(format!("problem does not declare {what}"));
        let l_f = problem.map.l_f.ok_or_else(|| missing("L^F"))?;
        let l_fprime = problem.map.l_fprime.ok_or_else(|| missing("L^F'"))?;
        let beta = problem.map.beta.ok_or_else(|| missing("beta"))?;
        Ok(Self::from_parts(problem.l_omega, l_f, l_fprime, beta, eps_f, eps_fprime, n))
    }

    pub fn from_parts(
        l_omega: f64,
        l_f: f64,
        l_fprime: f64,
        beta: f64,
        eps_f: f64,
        eps_fprime: f64,
        n: usize,
    ) -> Self {
        let gamma = (n as f64).sqrt();
        Self {
            m0: 2.0 * l_omega * eps_f,
            m1: l_omega * eps_fprime,
            m2: l_omega * l_fprime + 0.5 * beta,
            l_ell: gamma * l_omega * (l_f + eps_fprime),
            gamma,
            beta,
        }
    }

    /// Bound on `|φ̂(x + d) − q̂(d)|` for a step of Euclidean length `norm`.
    pub fn model_error_bound(&self, norm: f64) -> f64 {
        self.m0 + self.m1 * norm + self.m2 * norm * norm
    }
}

/// `ϑ* = (M₀ + M₁)/(1 − ρ_u)`, the smallest stabilizer covered by the theory.
pub fn required_stabilization(consts: &NoiseConstants, rho_u: f64) -> f64 {
    (consts.m0 + consts.m1) / (1.0 - rho_u)
}

/// `ϑ*` from the noise levels alone, for problems whose map constants are
/// unknown: only `M₀` and `M₁` enter the formula.
pub fn stabilization_for(l_omega: f64, eps_f: f64, eps_fprime: f64, rho_u: f64) -> f64 {
    l_omega * (2.0 * eps_f + eps_fprime) / (1.0 - rho_u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRegion {
    pub a: f64,
    pub b: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Some term of `B` divided by zero and was taken as `+∞`.
    pub unbounded: bool,
}

/// `A`, `B`, `Δ_min = min(A, Bδ)` and `δ_max` for the stabilizer in `config`.
pub fn critical_region_constants(consts: &NoiseConstants, config: &SolverConfig, delta: f64) -> CriticalRegion {
    let gamma = consts.gamma;
    let c = config;
    let a = (c.theta_shrink * gamma * gamma)
        .min(c.delta_0)
        .min(c.delta_lp_0 * gamma)
        .min(gamma / c.delta_lp_max);

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };
    let terms = [
        ratio(
            (1.0 - c.rho_u) * c.eta * (c.theta_shrink.powi(2)).min(c.kappa_l.powi(2)),
            gamma * consts.m2 * c.delta_lp_max,
        ),
        ratio(gamma, consts.l_ell),
        ratio(2.0 * (1.0 - c.eta) * c.tau, consts.beta * gamma * c.delta_lp_max),
    ];
    let unbounded = terms.iter().any(|t| t.is_infinite());
    let b = terms.into_iter().fold(f64::INFINITY, f64::min);

    let scale = c.vartheta * (1.0 - c.rho_u) * gamma * c.delta_lp_max / (c.rho_u * c.eta);
    let delta_max = (scale / b).sqrt().max(scale / a);
    CriticalRegion {
        a,
        b,
        delta_min: a.min(b * delta),
        delta_max,
        unbounded,
    }
}

/// Lower bound on `‖d_C‖_LP` while the iterate is not critical.
pub fn cauchy_norm_lower_bound(
    consts: &NoiseConstants,
    config: &SolverConfig,
    delta: f64,
    delta_lp: f64,
    psi_hat_1: f64,
) -> f64 {
    let gamma = consts.gamma;
    let curvature_term = if consts.beta > 0.0 {
        f64::min(1.0, 1.0 / delta_lp) * 2.0 * (1.0 - config.eta) * config.tau * psi_hat_1
            / (consts.beta * gamma * gamma)
    } else {
        f64::INFINITY
    };
    let lipschitz_term = if consts.l_ell > 0.0 {
        psi_hat_1 / consts.l_ell
    } else {
        f64::INFINITY
    };
    (delta / gamma).min(delta_lp).min(lipschitz_term).min(curvature_term)
}
