//! The JSON run configuration shared by `solve`, `sweep` and `verify`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use noisy_slp::oracle::{noise_levels, NoiseModel};
use noisy_slp::problems::{
    hs71_penalty, quadratic_l1, rosenbrock_l1, synthetic_image, tv_reconstruction,
    CompositeProblem,
};
use noisy_slp::solver::{stabilization_for, Curvature, SolverConfig, StepMode};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{HarnessError, Result};
use crate::pgm;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NOISY_SLP_OUT_DIR";

/// A benchmark problem and its parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    QuadraticL1 {
        /// Defaults to the eight-variable diagonal `10^(−5 + i/4)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diag: Option<Vec<f64>>,
        #[serde(default = "default_quadratic_lambda")]
        lambda: f64,
        /// Defaults to `(1000, 0, …, 0)`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
    },
    RosenbrockL1 {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "default_rosenbrock_b")]
        b: f64,
        #[serde(default = "default_rosenbrock_lambda")]
        lambda: f64,
        #[serde(default = "default_rosenbrock_x0")]
        x0: [f64; 2],
    },
    Hs71Penalty {
        #[serde(default = "default_hs71_nu")]
        nu: f64,
    },
    TvReconstruction {
        /// PGM file; the synthetic image of size `rows × cols` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image: Option<PathBuf>,
        #[serde(default = "default_image_side")]
        rows: usize,
        #[serde(default = "default_image_side")]
        cols: usize,
        #[serde(default = "default_tv_lambda")]
        lambda: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn default_quadratic_lambda() -> f64 {
    1e-2
}
fn default_rosenbrock_b() -> f64 {
    100.0
}
fn default_rosenbrock_lambda() -> f64 {
    0.1
}
fn default_rosenbrock_x0() -> [f64; 2] {
    [-1.5, 0.0]
}
fn default_hs71_nu() -> f64 {
    100.0
}
fn default_image_side() -> usize {
    32
}
fn default_tv_lambda() -> f64 {
    5e-3
}

impl ProblemConfig {
    /// Builds the problem. Relative image paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<CompositeProblem> {
        let problem = match self {
            ProblemConfig::QuadraticL1 { diag, lambda, x0 } => {
                let diag = diag.clone().unwrap_or_else(default_diag);
                let x0 = x0.clone().unwrap_or_else(|| {
                    let mut x = vec![0.0; diag.len()];
                    if let Some(first) = x.first_mut() {
                        *first = 1000.0;
                    }
                    x
                });
                quadratic_l1(diag, *lambda, x0)?
            }
            ProblemConfig::RosenbrockL1 { a, b, lambda, x0 } => rosenbrock_l1(*a, *b, *lambda, *x0)?,
            ProblemConfig::Hs71Penalty { nu } => hs71_penalty(*nu)?,
            ProblemConfig::TvReconstruction {
                image,
                rows,
                cols,
                lambda,
            } => tv_reconstruction(&self.image(image.as_deref(), *rows, *cols, base)?, *lambda)?,
        };
        Ok(problem)
    }

    fn image(&self, path: Option<&Path>, rows: usize, cols: usize, base: Option<&Path>) -> Result<DMatrix<f64>> {
        match path {
            Some(path) => {
                let path = match base {
                    Some(base) if path.is_relative() => base.join(path),
                    _ => path.to_path_buf(),
                };
                pgm::read_file(&path)
            }
            None => {
                if rows < 8 || cols < 8 {
                    return Err(HarnessError::Config(format!(
                        "synthetic image needs at least 8×8 pixels, got {rows}×{cols}"
                    )));
                }
                Ok(synthetic_image(rows, cols))
            }
        }
    }

    /// Solver settings the problem prefers unless the config says otherwise.
    fn solver_defaults(&self) -> Map<String, Value> {
        let mut map = Map::new();
        if matches!(self, ProblemConfig::TvReconstruction { .. }) {
            // Image runs use the plain linear model.
            map.insert("curvature".into(), serde_json::to_value(Curvature::Zero).unwrap());
            map.insert("step_mode".into(), serde_json::to_value(StepMode::CauchyOnly).unwrap());
        }
        map
    }
}

fn default_diag() -> Vec<f64> {
    (0..8).map(|i| 10f64.powf(-5.0 + 0.25 * i as f64)).collect()
}

/// Either an explicit stabilizer or the smallest one the theory covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vartheta {
    Value(f64),
    Rule(VarthetaRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarthetaRule {
    /// `ϑ* = L^ω(2ε_F + ε_F′)/(1 − ρ_u)` for the cell's noise levels.
    Required,
}

impl Vartheta {
    pub fn resolve(&self, problem: &CompositeProblem, noise: &NoiseModel, rho_u: f64) -> Result<f64> {
        match *self {
            Vartheta::Value(v) => Ok(v),
            Vartheta::Rule(VarthetaRule::Required) => {
                let dims = problem.map.image_target().map(|t| (t.rows, t.cols));
                let (eps_f, eps_fp) = noise_levels(noise, dims)?;
                Ok(stabilization_for(problem.constants().l_omega, eps_f, eps_fp, rho_u))
            }
        }
    }
}

/// The solver section: any [`SolverConfig`] field, with `vartheta` also
/// accepting `"required"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vartheta: Option<Vartheta>,
    #[serde(flatten)]
    pub rest: Map<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vartheta: Vec<Vartheta>,
    /// Overrides `eps_f` of a `BallUniform` noise model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_f: Vec<f64>,
    /// Overrides `eps_img` of an `ImageRedraw` noise model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_img: Vec<f64>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.vartheta.is_empty() && self.eps_f.is_empty() && self.eps_img.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default = "no_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_count: Option<usize>,
    /// Base RNG stream; sweep cell `i` uses `stream + i`.
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub sweep: SweepAxes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn no_noise() -> NoiseModel {
    NoiseModel::NoNoise
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.seed_list().is_empty() {
            return Err(HarnessError::Config("seed list is empty".into()));
        }
        let bad_grid = |name: &str, values: &[f64]| {
            values
                .iter()
                .find(|v| !v.is_finite() || **v < 0.0)
                .map(|v| HarnessError::Config(format!("{name} grid contains {v}")))
        };
        if let Some(e) = bad_grid("eps_f", &self.sweep.eps_f).or_else(|| bad_grid("eps_img", &self.sweep.eps_img)) {
            return Err(e);
        }
        for v in self.sweep.vartheta.iter().chain(self.solver.vartheta.iter()) {
            if let Vartheta::Value(x) = v {
                if !x.is_finite() || *x < 0.0 {
                    return Err(HarnessError::Config(format!("vartheta {x} must be finite and nonnegative")));
                }
            }
        }
        if !self.sweep.eps_f.is_empty() && !matches!(self.noise, NoiseModel::BallUniform { .. }) {
            return Err(HarnessError::Config("an eps_f axis needs BallUniform noise".into()));
        }
        if !self.sweep.eps_img.is_empty() && !matches!(self.noise, NoiseModel::ImageRedraw { .. }) {
            return Err(HarnessError::Config("an eps_img axis needs ImageRedraw noise".into()));
        }
        self.solver_config(0.0)?;
        Ok(())
    }

    /// Seeds in run order: the explicit list, else `0..seed_count`, else `[0]`.
    pub fn seed_list(&self) -> Vec<u64> {
        match (&self.seeds, self.seed_count) {
            (Some(seeds), _) => seeds.clone(),
            (None, Some(count)) => (0..count as u64).collect(),
            (None, None) => vec![0],
        }
    }

    /// The solver configuration with the stabilizer filled in.
    pub fn solver_config(&self, vartheta: f64) -> Result<SolverConfig> {
        let mut fields = self.problem.solver_defaults();
        fields.extend(self.solver.rest.clone());
        fields.insert("vartheta".into(), Value::from(vartheta));
        let config: SolverConfig =
            serde_json::from_value(Value::Object(fields)).map_err(|e| HarnessError::Config(format!("solver: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Output directory: the config's, else `$NOISY_SLP_OUT_DIR`, else `out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
