//! Command-line front end. Exit codes: 0 success, 1 error, 2 stalled solve,
//! 3 failed property check.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use noisy_slp::problems::synthetic_image;
use noisy_slp::solver::{SolverConfig, Termination};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{self, termination_name};
use crate::pgm::{self, Encoding};
use crate::run;
use crate::summary::SeedSummary;
use crate::verify::{verify, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_STALLED: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "noisy-slp", version, about = "Noise-tolerant SLP trust-region experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one seed and write its iteration log and summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config and NOISY_SLP_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of the sweep grid for every seed.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the theory's inequalities on seeded random instances.
    Verify(VerifyArgs),
    /// PGM utilities.
    #[command(subcommand)]
    Pgm(PgmCommand),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    /// Scale applied to M₂ before the error-bound check (mutation testing).
    #[arg(long, default_value_t = 1.0)]
    pub m2_scale: f64,
    /// Where violating instances are written.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PgmCommand {
    /// Re-encode a PGM file at maxval 255.
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// Write plain (P2) instead of binary (P5).
        #[arg(long)]
        plain: bool,
    },
    /// Write the synthetic test image.
    Synthetic {
        output: PathBuf,
        #[arg(long, default_value_t = 32)]
        rows: usize,
        #[arg(long, default_value_t = 32)]
        cols: usize,
        #[arg(long)]
        plain: bool,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn execute(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out),
        Command::Sweep { config, jobs, out } => cmd_sweep(&config, jobs, out),
        Command::Verify(args) => cmd_verify(&args),
        Command::Pgm(cmd) => cmd_pgm(cmd),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

fn load(path: &Path) -> Result<(RunConfig, Option<PathBuf>)> {
    let config = RunConfig::load(path)?;
    Ok((config, path.parent().map(Path::to_path_buf)))
}

#[derive(Debug, Serialize)]
struct SolveSummary<'a> {
    problem: &'a str,
    stream: u64,
    noise: noisy_slp::oracle::NoiseModel,
    solver: &'a SolverConfig,
    #[serde(flatten)]
    result: SeedSummary,
}

pub fn cmd_solve(config_path: &Path, out: Option<PathBuf>) -> Result<i32> {
    let (config, base) = load(config_path)?;
    let dir = out.unwrap_or_else(|| config.output_dir());
    let outcome = run::solve(&config, base.as_deref())?;
    output::create_dir(&dir)?;
    output::write_records_file(&dir.join("records.csv"), outcome.records())?;
    let summary = SolveSummary {
        problem: &outcome.problem.name,
        stream: config.stream,
        noise: config.noise,
        solver: &outcome.solver,
        result: outcome.summary(),
    };
    output::write_json_file(&dir.join("summary.json"), &summary)?;
    match &outcome.result {
        Ok(result) => {
            println!(
                "{}: {} after {} iterations, phi = {:.6e}",
                outcome.problem.name,
                termination_name(result.termination),
                result.records.len() - 1,
                outcome.problem.phi(&result.x_final)
            );
            Ok(if result.termination == Termination::Stalled {
                EXIT_STALLED
            } else {
                EXIT_OK
            })
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            Ok(EXIT_ERROR)
        }
    }
}

pub fn cmd_sweep(config_path: &Path, jobs: usize, out: Option<PathBuf>) -> Result<i32> {
    let (config, base) = load(config_path)?;
    let dir = out.unwrap_or_else(|| config.output_dir());
    let report = run::sweep(&config, base.as_deref(), jobs)?;
    run::write_sweep(&dir, &report)?;
    for cell in &report.cells {
        let a = &cell.aggregate;
        println!(
            "cell {} vartheta={:.4e}: {} critical, {} stalled, {} at limit, {} failed; median phi = {}",
            cell.cell.index,
            cell.vartheta,
            a.critical,
            a.stalled,
            a.iter_limit,
            a.failed,
            a.phi_true.map_or("-".into(), |q| format!("{:.6e}", q.median)),
        );
    }
    if report.acceptable() {
        Ok(EXIT_OK)
    } else {
        eprintln!("only {} of {} runs completed", report.completed_runs(), report.total_runs());
        Ok(EXIT_ERROR)
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let report = verify(&VerifyOptions {
        seed: args.seed,
        instances: args.instances,
        m2_scale: args.m2_scale,
    });
    for p in &report.properties {
        println!(
            "{} {:<24} {:>5} instances, worst margin {:.3e}",
            if p.passed() { "PASS" } else { "FAIL" },
            p.name,
            p.instances,
            p.worst_margin
        );
    }
    if report.passed() {
        return Ok(EXIT_OK);
    }
    let failures: Vec<_> = report.properties.iter().filter(|p| !p.passed()).collect();
    let dir = args.out.clone().unwrap_or_else(|| {
        std::env::var_os(crate::config::OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
    });
    let path = dir.join("verify_failures.json");
    match output::create_dir(&dir).and_then(|_| output::write_json_file(&path, &failures)) {
        Ok(()) => eprintln!("violating instances written to {}", path.display()),
        Err(e) => {
            eprintln!("could not write {}: {e}", path.display());
            eprintln!("{}", serde_json::to_string(&failures)?);
        }
    }
    Ok(EXIT_VIOLATION)
}

fn encoding(plain: bool) -> Encoding {
    if plain {
        Encoding::Plain
    } else {
        Encoding::Binary
    }
}

pub fn cmd_pgm(cmd: PgmCommand) -> Result<i32> {
    match cmd {
        PgmCommand::Convert { input, output, plain } => {
            let image = pgm::read_file(&input)?;
            pgm::write_file(&output, &image, encoding(plain))?;
        }
        PgmCommand::Synthetic {
            output,
            rows,
            cols,
            plain,
        } => {
            if rows < 8 || cols < 8 {
                return Err(crate::HarnessError::Config("synthetic image needs at least 8×8 pixels".into()));
            }
            pgm::write_file(&output, &synthetic_image(rows, cols), encoding(plain))?;
        }
    }
    Ok(EXIT_OK)
}
