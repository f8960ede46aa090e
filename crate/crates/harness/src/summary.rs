//! Per-seed outcomes and their per-cell aggregates.

use nalgebra::DVector;
use noisy_slp::lp::criticality;
use noisy_slp::problems::CompositeProblem;
use noisy_slp::solver::{RunResult, Termination};
use serde::{Deserialize, Serialize};

/// How one seed ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub termination: Option<Termination>,
    /// Message of a run that failed with an error.
    pub error: Option<String>,
    pub iterations: usize,
    pub evaluations: usize,
    pub phi_true: Option<f64>,
    pub phi_hat: Option<f64>,
    pub psi_true_1: Option<f64>,
    pub psi_hat_1: Option<f64>,
    pub distance: Option<f64>,
    pub feasibility: Option<f64>,
    pub x_final: Option<Vec<f64>>,
}

impl SeedSummary {
    /// Final values of a finished run, measured noise-free at `x_final`.
    pub fn from_run(problem: &CompositeProblem, seed: u64, result: &RunResult) -> Self {
        let last = result.last();
        let x = &result.x_final;
        Self {
            seed,
            termination: Some(result.termination),
            error: None,
            iterations: result.records.len() - 1,
            evaluations: result.evaluations,
            phi_true: Some(problem.phi(x)),
            phi_hat: Some(last.phi_hat),
            psi_true_1: last.psi_true_1.or_else(|| true_criticality(problem, x)),
            psi_hat_1: Some(last.psi_hat_1),
            distance: problem.distance_to_optimum(x),
            feasibility: problem.feasibility_residual(x),
            x_final: Some(x.as_slice().to_vec()),
        }
    }

    pub fn failed(seed: u64, error: String, iterations: usize) -> Self {
        Self {
            seed,
            termination: None,
            error: Some(error),
            iterations,
            evaluations: 0,
            phi_true: None,
            phi_hat: None,
            psi_true_1: None,
            psi_hat_1: None,
            distance: None,
            feasibility: None,
            x_final: None,
        }
    }
}

fn true_criticality(problem: &CompositeProblem, x: &DVector<f64>) -> Option<f64> {
    let f = problem.map.eval(x);
    let j = problem.map.jacobian(x);
    criticality(&problem.spec, &f, &j, 1.0).ok()
}

/// First quartile, median and third quartile (linear interpolation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        })
    }
}

/// Quantile of sorted data, interpolating between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Counts and quartiles over the seeds of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: usize,
    pub failed: usize,
    pub critical: usize,
    pub stalled: usize,
    pub iter_limit: usize,
    pub phi_true: Option<Quartiles>,
    pub psi_true_1: Option<Quartiles>,
    pub distance: Option<Quartiles>,
    pub feasibility: Option<Quartiles>,
}

impl Aggregate {
    pub fn of(runs: &[SeedSummary]) -> Self {
        let count = |t: Termination| runs.iter().filter(|r| r.termination == Some(t)).count();
        let quartiles = |f: fn(&SeedSummary) -> Option<f64>| Quartiles::of(runs.iter().filter_map(f));
        Self {
            seeds: runs.len(),
            failed: runs.iter().filter(|r| r.error.is_some()).count(),
            critical: count(Termination::Critical),
            stalled: count(Termination::Stalled),
            iter_limit: count(Termination::IterLimit),
            phi_true: quartiles(|r| r.phi_true),
            psi_true_1: quartiles(|r| r.psi_true_1),
            distance: quartiles(|r| r.distance),
            feasibility: quartiles(|r| r.feasibility),
        }
    }

    pub fn completed(&self) -> usize {
        self.seeds - self.failed
    }
}
