//! Single solves and multi-seed sweeps.

use std::path::Path;

use noisy_slp::oracle::{NoiseModel, NoisyOracle};
use noisy_slp::problems::CompositeProblem;
use noisy_slp::solver::{run, RunFailure, RunResult, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Vartheta};
use crate::error::{HarnessError, Result};
use crate::output::{self, float, opt_float, termination_name};
use crate::summary::{Aggregate, Quartiles, SeedSummary};

pub fn run_seed(
    problem: &CompositeProblem,
    noise: NoiseModel,
    config: &SolverConfig,
    seed: u64,
    stream: u64,
) -> std::result::Result<RunResult, RunFailure> {
    let mut oracle = NoisyOracle::new(problem.map.as_ref(), noise, seed, stream).map_err(|source| RunFailure {
        source,
        records: Vec::new(),
    })?;
    run(problem, &mut oracle, config)
}

pub struct SolveOutcome {
    pub problem: CompositeProblem,
    pub solver: SolverConfig,
    pub seed: u64,
    pub result: std::result::Result<RunResult, RunFailure>,
}

impl SolveOutcome {
    pub fn records(&self) -> &[noisy_slp::solver::IterateRecord] {
        match &self.result {
            Ok(r) => &r.records,
            Err(f) => &f.records,
        }
    }

    pub fn summary(&self) -> SeedSummary {
        match &self.result {
            Ok(r) => SeedSummary::from_run(&self.problem, self.seed, r),
            Err(f) => SeedSummary::failed(self.seed, f.to_string(), f.records.len()),
        }
    }
}

/// Runs the first seed of `config` with its solver section.
pub fn solve(config: &RunConfig, base: Option<&Path>) -> Result<SolveOutcome> {
    let problem = config.problem.build(base)?;
    let rho_u = config.solver_config(0.0)?.rho_u;
    let vartheta = config
        .solver
        .vartheta
        .unwrap_or(Vartheta::Value(0.0))
        .resolve(&problem, &config.noise, rho_u)?;
    let solver = config.solver_config(vartheta)?;
    let seed = config.seed_list()[0];
    let result = run_seed(&problem, config.noise, &solver, seed, config.stream);
    Ok(SolveOutcome {
        problem,
        solver,
        seed,
        result,
    })
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub stream: u64,
    pub eps_f: Option<f64>,
    pub eps_img: Option<f64>,
    pub vartheta: Vartheta,
    pub noise: NoiseModel,
}

/// The Cartesian product of the axes, `eps_f` outermost and `vartheta`
/// innermost. A missing axis contributes the base configuration's value.
pub fn cells(config: &RunConfig) -> Vec<Cell> {
    let axes = &config.sweep;
    let eps_f: Vec<Option<f64>> = if axes.eps_f.is_empty() {
        vec![None]
    } else {
        axes.eps_f.iter().copied().map(Some).collect()
    };
    let eps_img: Vec<Option<f64>> = if axes.eps_img.is_empty() {
        vec![None]
    } else {
        axes.eps_img.iter().copied().map(Some).collect()
    };
    let vartheta = if axes.vartheta.is_empty() {
        vec![config.solver.vartheta.unwrap_or(Vartheta::Value(0.0))]
    } else {
        axes.vartheta.clone()
    };
    let mut out = Vec::new();
    for &ef in &eps_f {
        for &ei in &eps_img {
            for &vt in &vartheta {
                let mut noise = config.noise;
                match &mut noise {
                    NoiseModel::BallUniform { eps_f, .. } => *eps_f = ef.unwrap_or(*eps_f),
                    NoiseModel::ImageRedraw { eps_img } => *eps_img = ei.unwrap_or(*eps_img),
                    NoiseModel::NoNoise => {}
                }
                let index = out.len();
                out.push(Cell {
                    index,
                    stream: config.stream + index as u64,
                    eps_f: ef,
                    eps_img: ei,
                    vartheta: vt,
                    noise,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    /// The stabilizer actually used.
    pub vartheta: f64,
    pub aggregate: Aggregate,
    pub runs: Vec<SeedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub problem: String,
    pub cells: Vec<CellReport>,
}

impl SweepReport {
    pub fn total_runs(&self) -> usize {
        self.cells.iter().map(|c| c.aggregate.seeds).sum()
    }

    pub fn completed_runs(&self) -> usize {
        self.cells.iter().map(|c| c.aggregate.completed()).sum()
    }

    /// At least 90% of all runs finished without an error.
    pub fn acceptable(&self) -> bool {
        10 * self.completed_runs() >= 9 * self.total_runs()
    }
}

/// Runs every (cell, seed) pair, `jobs` at a time (0 = all cores). The
/// report is ordered by cell, then seed, whatever the parallelism.
pub fn sweep(config: &RunConfig, base: Option<&Path>, jobs: usize) -> Result<SweepReport> {
    if config.sweep.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one axis".into()));
    }
    let problem = config.problem.build(base)?;
    let rho_u = config.solver_config(0.0)?.rho_u;
    let cells = cells(config);
    let mut solvers = Vec::with_capacity(cells.len());
    for cell in &cells {
        let vartheta = cell.vartheta.resolve(&problem, &cell.noise, rho_u)?;
        solvers.push((vartheta, config.solver_config(vartheta)?));
    }
    let seeds = config.seed_list();
    let tasks: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let runs: Vec<SeedSummary> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, seed)| {
                let cell = &cells[c];
                match run_seed(&problem, cell.noise, &solvers[c].1, seed, cell.stream) {
                    Ok(result) => SeedSummary::from_run(&problem, seed, &result),
                    Err(failure) => {
                        log::warn!("cell {c} seed {seed}: {failure}");
                        SeedSummary::failed(seed, failure.to_string(), failure.records.len())
                    }
                }
            })
            .collect()
    });

    let mut runs = runs.into_iter();
    let reports = cells
        .into_iter()
        .zip(solvers)
        .map(|(cell, (vartheta, _))| {
            let cell_runs: Vec<SeedSummary> = runs.by_ref().take(seeds.len()).collect();
            CellReport {
                aggregate: Aggregate::of(&cell_runs),
                cell,
                vartheta,
                runs: cell_runs,
            }
        })
        .collect();
    Ok(SweepReport {
        problem: problem.name.clone(),
        cells: reports,
    })
}

fn cell_key(report: &CellReport) -> [String; 4] {
    [
        report.cell.index.to_string(),
        opt_float(report.cell.eps_f),
        opt_float(report.cell.eps_img),
        float(report.vartheta),
    ]
}

pub const RUNS_HEADER: [&str; 15] = [
    "cell",
    "eps_f",
    "eps_img",
    "vartheta",
    "seed",
    "termination",
    "iterations",
    "evaluations",
    "phi_true",
    "phi_hat",
    "psi_true_1",
    "psi_hat_1",
    "distance",
    "feasibility",
    "error",
];

/// One row per (cell, seed).
pub fn write_runs<W: std::io::Write>(out: W, report: &SweepReport) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RUNS_HEADER)?;
    for cell in &report.cells {
        for r in &cell.runs {
            let mut row: Vec<String> = cell_key(cell).into();
            row.extend([
                r.seed.to_string(),
                r.termination.map(termination_name).unwrap_or_default().to_string(),
                r.iterations.to_string(),
                r.evaluations.to_string(),
                opt_float(r.phi_true),
                opt_float(r.phi_hat),
                opt_float(r.psi_true_1),
                opt_float(r.psi_hat_1),
                opt_float(r.distance),
                opt_float(r.feasibility),
                r.error.clone().unwrap_or_default(),
            ]);
            writer.write_record(row)?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

const METRICS: [&str; 4] = ["phi_true", "psi_true_1", "distance", "feasibility"];

/// One row per cell.
pub fn write_cells<W: std::io::Write>(out: W, report: &SweepReport) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["cell", "eps_f", "eps_img", "vartheta", "stream", "seeds", "failed", "critical", "stalled", "iter_limit"]
        .map(String::from)
        .into();
    for m in METRICS {
        header.extend(["q1", "median", "q3"].map(|q| format!("{m}_{q}")));
    }
    writer.write_record(&header)?;
    for cell in &report.cells {
        let a = &cell.aggregate;
        let mut row: Vec<String> = cell_key(cell).into();
        row.extend(
            [cell.cell.stream as usize, a.seeds, a.failed, a.critical, a.stalled, a.iter_limit].map(|v| v.to_string()),
        );
        for q in [a.phi_true, a.psi_true_1, a.distance, a.feasibility] {
            let q: Option<Quartiles> = q;
            row.extend([q.map(|q| q.q1), q.map(|q| q.median), q.map(|q| q.q3)].map(opt_float));
        }
        writer.write_record(row)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `runs.csv`, `summary.csv` and `summary.json` in `dir`.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    output::create_dir(dir)?;
    let open = |name: &str| {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .map(std::io::BufWriter::new)
            .map_err(crate::error::io_error(&path))
    };
    write_runs(open("runs.csv")?, report)?;
    write_cells(open("summary.csv")?, report)?;
    output::write_json_file(&dir.join("summary.json"), report)
}
