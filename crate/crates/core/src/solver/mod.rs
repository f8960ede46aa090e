//! The trust-region loop with stabilized acceptance.
//!
//! Each iteration solves the LP `min_{‖d‖∞ ≤ Δ^LP} ℓ̂(d)`, shortens the LP
//! step along its ray until the quadratic model shows sufficient decrease,
//! optionally improves it, and accepts the trial point when the stabilized
//! ratio `(φ̂(x) − φ̂(x+d) + ϑ)/(q̂(0) − q̂(d) + ϑ)` reaches `ρ_u`.

mod config;
mod constants;
mod steps;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use config::{Curvature, EvaluationPolicy, SolverConfig, StepMode};
pub use constants::{
    cauchy_norm_lower_bound, critical_region_constants, required_stabilization, stabilization_for, CriticalRegion,
    NoiseConstants,
};
pub use steps::{cauchy_search, improve_step, stabilized_ratio, update_radii, LocalModel};

use crate::error::{Error, Result};
use crate::lp::{criticality, solve_subproblem};
use crate::oracle::NoisyOracle;
use crate::problems::CompositeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    /// `Ψ̂(1)` fell below the criticality tolerance.
    Critical,
    /// The LP trust radius collapsed.
    Stalled,
    IterLimit,
}

/// One row of the iteration log. Radii and objective values are those at the
/// start of iteration `k`; step fields are empty on the terminating row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub accepted: bool,
    pub rho_hat: Option<f64>,
    pub alpha: Option<f64>,
    pub step_norm_2: Option<f64>,
    pub step_norm_lp: Option<f64>,
    pub delta: f64,
    pub delta_lp: f64,
    pub phi_hat: f64,
    pub phi_true: Option<f64>,
    pub psi_hat_1: f64,
    pub psi_true_1: Option<f64>,
    pub termination: Option<Termination>,
}

/// Loop state at the start of an iteration.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub k: usize,
    pub x: DVector<f64>,
    pub delta: f64,
    pub delta_lp: f64,
    pub phi_hat_x: f64,
    pub f_hat: DVector<f64>,
    pub j_hat: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x_final: DVector<f64>,
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    pub evaluations: usize,
}

impl RunResult {
    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("a run always logs its final iterate")
    }
}

/// A run that hit an error, with everything logged before it.
#[derive(Debug, Clone, thiserror::Error)]
#[error("run failed after {} iterations: {source}", records.len())]
pub struct RunFailure {
    pub source: Error,
    pub records: Vec<IterateRecord>,
}

/// Runs the method on `problem` drawing noisy values from `oracle`.
pub fn run(
    problem: &CompositeProblem,
    oracle: &mut NoisyOracle,
    config: &SolverConfig,
) -> std::result::Result<RunResult, RunFailure> {
    let mut records = Vec::new();
    match run_inner(problem, oracle, config, &mut records) {
        Ok((x_final, termination)) => Ok(RunResult {
            x_final,
            records,
            termination,
            evaluations: oracle.evaluations(),
        }),
        Err(source) => Err(RunFailure { source, records }),
    }
}

fn run_inner(
    problem: &CompositeProblem,
    oracle: &mut NoisyOracle,
    config: &SolverConfig,
    records: &mut Vec<IterateRecord>,
) -> Result<(DVector<f64>, Termination)> {
    config.validate()?;
    crate::error::check_dim(problem.map.p(), problem.spec.dim(), "map output vs. outer function")?;
    crate::error::check_dim(problem.n(), problem.x0.len(), "start point")?;
    let spec = &problem.spec;
    let noiseless = oracle.noise().is_noiseless();

    let (f_hat, j_hat) = oracle.evaluate(&problem.x0)?;
    let mut state = SolverState {
        k: 0,
        x: problem.x0.clone(),
        delta: config.delta_0,
        delta_lp: config.delta_lp_0,
        phi_hat_x: spec.eval(f_hat.as_slice())?,
        f_hat,
        j_hat,
    };

    loop {
        if config.evaluation == EvaluationPolicy::PerIteration && state.k > 0 {
            let (f_hat, j_hat) = oracle.evaluate(&state.x)?;
            state.phi_hat_x = spec.eval_unchecked(f_hat.as_slice());
            state.f_hat = f_hat;
            state.j_hat = j_hat;
        }

        let mut record = IterateRecord {
            k: state.k,
            accepted: false,
            rho_hat: None,
            alpha: None,
            step_norm_2: None,
            step_norm_lp: None,
            delta: state.delta,
            delta_lp: state.delta_lp,
            phi_hat: state.phi_hat_x,
            phi_true: Some(problem.phi(&state.x)),
            psi_hat_1: 0.0,
            psi_true_1: None,
            termination: None,
        };

        let stalled = state.delta_lp < config.tol_lp_radius;
        // The LP step is only needed when the radius is still usable; the
        // criticality LP shares it when Δ^LP = 1.
        let lp_step = if stalled {
            None
        } else {
            Some(solve_subproblem(spec, &state.f_hat, &state.j_hat, state.delta_lp)?)
        };
        record.psi_hat_1 = match &lp_step {
            Some(sol) if state.delta_lp == 1.0 => sol.decrease.max(0.0),
            _ => criticality(spec, &state.f_hat, &state.j_hat, 1.0)?,
        };
        if config.track_true_criticality {
            record.psi_true_1 = Some(if noiseless {
                record.psi_hat_1
            } else {
                let (f, j) = oracle.exact(&state.x);
                criticality(spec, &f, &j, 1.0)?
            });
        }

        let termination = if record.psi_hat_1 < config.tol_criticality {
            Some(Termination::Critical)
        } else if stalled {
            Some(Termination::Stalled)
        } else if state.k >= config.max_iter {
            Some(Termination::IterLimit)
        } else {
            None
        };
        if let Some(reason) = termination {
            record.termination = Some(reason);
            records.push(record);
            return Ok((state.x, reason));
        }

        let lp_step = lp_step.expect("LP step solved when not stalled");
        if !(lp_step.decrease > 0.0) {
            warn!(
                "iteration {}: LP step predicts no decrease although psi_hat(1) = {:e}; treating as stalled",
                state.k, record.psi_hat_1
            );
            record.termination = Some(Termination::Stalled);
            records.push(record);
            return Ok((state.x, Termination::Stalled));
        }

        let curvature = match config.curvature {
            Curvature::Zero => None,
            Curvature::Exact => problem.map.curvature(&state.x),
        };
        let model = LocalModel::new(spec, &state.f_hat, &state.j_hat, curvature.as_ref());
        let (alpha, d_c) = cauchy_search(&model, &lp_step.d, state.delta, config)?;
        let d = improve_step(&model, &d_c, state.delta, config.step_mode);
        let model_decrease = model.quadratic_decrease(&d);

        if cfg!(debug_assertions) {
            let slack = 1e-8 * (1.0 + state.phi_hat_x.abs());
            let chain = [
                model_decrease,
                model.quadratic_decrease(&d_c),
                config.eta * alpha * lp_step.decrease,
                config.eta * alpha * state.delta_lp.min(1.0) * record.psi_hat_1,
            ];
            debug_assert!(
                chain.windows(2).all(|w| w[0] >= w[1] - slack),
                "model decrease chain violated at iteration {}: {chain:?}",
                state.k
            );
        }

        let trial = &state.x + &d;
        let (f_trial, j_trial) = oracle.evaluate(&trial)?;
        let phi_trial = spec.eval_unchecked(f_trial.as_slice());
        let rho = stabilized_ratio(state.phi_hat_x, phi_trial, model_decrease, config.vartheta);
        if rho.is_none() {
            warn!(
                "iteration {}: non-positive ratio denominator {:e}; rejecting step",
                state.k,
                model_decrease + config.vartheta
            );
        }
        let accepted = rho.is_some_and(|r| r >= config.rho_u);
        let step_norm_2 = d.norm();
        let step_norm_lp = d.amax();
        let (delta_next, delta_lp_next) = update_radii(
            config,
            state.delta,
            state.delta_lp,
            rho,
            alpha,
            step_norm_2,
            step_norm_lp,
        );
        debug!(
            "k={} phi_hat={:.6e} psi_hat={:.3e} rho={:?} alpha={} |d|={:.3e} accepted={}",
            state.k, state.phi_hat_x, record.psi_hat_1, rho, alpha, step_norm_2, accepted
        );

        record.accepted = accepted;
        record.rho_hat = Some(rho.unwrap_or(f64::NEG_INFINITY));
        record.alpha = Some(alpha);
        record.step_norm_2 = Some(step_norm_2);
        record.step_norm_lp = Some(step_norm_lp);
        records.push(record);

        if accepted {
            state.x = trial;
            state.phi_hat_x = phi_trial;
            state.f_hat = f_trial;
            state.j_hat = j_trial;
        }
        state.delta = delta_next;
        state.delta_lp = delta_lp_next;
        state.k += 1;
    }
}
