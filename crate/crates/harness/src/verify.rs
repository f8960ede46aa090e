//! Randomized checks of the inequalities the convergence theory relies on.
//!
//! Every property runs on seeded instances and reports the smallest margin
//! seen (bound minus observed value); a property fails when some margin drops
//! below its tolerance (`SLACK`, or 1e-9 for the LP comparison). The first
//! violating instance is kept for replay.

use nalgebra::{DMatrix, DVector};
use noisy_slp::lp::{criticality, enumerate_vertices, solve_lp, solve_subproblem, LinearRow, LpProblem, LpStatus};
use noisy_slp::oracle::{NoiseModel, NoisyOracle};
use noisy_slp::problems::{quadratic_l1_default, rosenbrock_l1_default, CompositeProblem};
use noisy_slp::solver::{
    cauchy_norm_lower_bound, cauchy_search, improve_step, LocalModel, NoiseConstants, SolverConfig, StepMode,
};
use noisy_slp::PolyhedralSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Additive tolerance on every inequality.
pub const SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Instances per property (the LP comparison uses at least 500).
    pub instances: usize,
    /// Multiplies `M₂` before the error-bound check. Anything below one is a
    /// deliberately broken constant that the suite should catch.
    pub m2_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 200,
            m2_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    pub worst_margin: f64,
    /// The first violating instance.
    pub counterexample: Option<Value>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub properties: Vec<PropertyReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }
}

struct Tally {
    report: PropertyReport,
    tolerance: f64,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self::with_tolerance(name, SLACK)
    }

    fn with_tolerance(name: &str, tolerance: f64) -> Self {
        Self {
            tolerance,
            report: PropertyReport {
                name: name.into(),
                instances: 0,
                violations: 0,
                worst_margin: f64::INFINITY,
                counterexample: None,
            },
        }
    }

    /// Records `bound − observed`; `instance` is only built on a violation.
    fn check(&mut self, margin: f64, instance: impl FnOnce() -> Value) {
        self.report.instances += 1;
        self.report.worst_margin = self.report.worst_margin.min(margin);
        if !(margin >= -self.tolerance) {
            self.report.violations += 1;
            if self.report.counterexample.is_none() {
                self.report.counterexample = Some(instance());
            }
        }
    }

    fn fail(&mut self, instance: Value) {
        self.check(f64::NEG_INFINITY, || instance);
    }
}

pub fn verify(options: &VerifyOptions) -> VerifyReport {
    let rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(options.seed);
        r.set_stream(stream);
        r
    };
    let n = options.instances;
    VerifyReport {
        seed: options.seed,
        properties: vec![
            critical_normalization(&mut rng(1), n),
            model_decrease_chain(&mut rng(2), n),
            model_error_bound(&mut rng(3), n, options.m2_scale),
            linear_model_lipschitz(&mut rng(4), n),
            cauchy_step_bound(&mut rng(5), n),
            epi_convergence(&mut rng(6), n.div_ceil(8).max(20)),
            lp_matches_enumeration(&mut rng(7), n.max(500)),
        ],
    }
}

fn vector(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn matrix(m: &DMatrix<f64>) -> Value {
    json!({ "rows": m.nrows(), "cols": m.ncols(), "column_major": m.as_slice() })
}

fn random_point<R: Rng>(rng: &mut R, problem: &CompositeProblem) -> DVector<f64> {
    let (lo, hi) = problem.region.unwrap_or((-1.0, 1.0));
    DVector::from_fn(problem.n(), |_, _| rng.random_range(lo..=hi))
}

fn random_noise<R: Rng>(rng: &mut R) -> NoiseModel {
    NoiseModel::BallUniform {
        eps_f: rng.random_range(0.0..0.1),
        eps_jac: rng.random_range(0.0..1e-3),
    }
}

fn noise_radii(noise: &NoiseModel) -> (f64, f64) {
    match *noise {
        NoiseModel::BallUniform { eps_f, eps_jac } => (eps_f, eps_jac),
        _ => (0.0, 0.0),
    }
}

fn random_composite<R: Rng>(rng: &mut R) -> (PolyhedralSpec, DVector<f64>, DMatrix<f64>) {
    let n = rng.random_range(1..=5);
    let n_ineq = rng.random_range(0..=3);
    let n_eq = rng.random_range(0..=3);
    let p = 1 + n_ineq + n_eq;
    let spec = PolyhedralSpec::composite_penalty(rng.random_range(0.01..10.0), n_ineq, n_eq).unwrap();
    let f = DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0));
    let j = DMatrix::from_fn(p, n, |_, _| rng.random_range(-2.0..2.0));
    (spec, f, j)
}

/// `Ψ̂(Δ) ≥ min(Δ, 1) Ψ̂(1)`.
fn critical_normalization(rng: &mut ChaCha8Rng, instances: usize) -> PropertyReport {
    let mut tally = Tally::new("critical_normalization");
    for _ in 0..instances {
        let (spec, f, j) = random_composite(rng);
        let radius = 10f64.powf(rng.random_range(-3.0..1.0));
        let (Ok(at_one), Ok(at_radius)) = (criticality(&spec, &f, &j, 1.0), criticality(&spec, &f, &j, radius)) else {
            tally.fail(json!({ "spec": spec, "f": vector(&f), "j": matrix(&j), "radius": radius, "error": "LP failed" }));
            continue;
        };
        tally.check(at_radius - radius.min(1.0) * at_one, || {
            json!({ "spec": spec, "f": vector(&f), "j": matrix(&j), "radius": radius, "psi_radius": at_radius, "psi_one": at_one })
        });
    }
    tally.report
}

fn benchmark(rng: &mut ChaCha8Rng) -> CompositeProblem {
    if rng.random_bool(0.5) {
        quadratic_l1_default()
    } else {
        rosenbrock_l1_default()
    }
}

/// `q̂(0) − q̂(d) ≥ q̂(0) − q̂(d_C) ≥ ηαΨ̂(Δ^LP) ≥ ηα min(Δ^LP, 1) Ψ̂(1)`.
fn model_decrease_chain(rng: &mut ChaCha8Rng, instances: usize) -> PropertyReport {
    let mut tally = Tally::new("model_decrease_chain");
    let config = SolverConfig::default();
    for _ in 0..instances {
        let problem = benchmark(rng);
        let x = random_point(rng, &problem);
        let noise = random_noise(rng);
        let delta = 10f64.powf(rng.random_range(-3.0..1.0));
        let delta_lp = 10f64.powf(rng.random_range(-3.0..1.0));
        let mut oracle = NoisyOracle::new(problem.map.as_ref(), noise, rng.random(), 0).unwrap();
        let (f, j) = oracle.evaluate(&x).unwrap();
        let b = problem.map.curvature(&x);
        let instance = || json!({ "problem": problem.name, "x": vector(&x), "noise": noise, "delta": delta, "delta_lp": delta_lp });
        let model = LocalModel::new(&problem.spec, &f, &j, b.as_ref());
        let steps = solve_subproblem(&problem.spec, &f, &j, delta_lp).and_then(|lp| {
            let psi_one = criticality(&problem.spec, &f, &j, 1.0)?;
            let (alpha, d_c) = cauchy_search(&model, &lp.d, delta, &config)?;
            Ok((lp, psi_one, alpha, d_c))
        });
        let Ok((lp, psi_one, alpha, d_c)) = steps else {
            tally.fail(instance());
            continue;
        };
        let d = improve_step(&model, &d_c, delta, StepMode::ImproveSmooth);
        let chain = [
            model.quadratic_decrease(&d),
            model.quadratic_decrease(&d_c),
            config.eta * alpha * lp.decrease.max(0.0),
            config.eta * alpha * delta_lp.min(1.0) * psi_one,
        ];
        let margin = chain.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
        let in_region = d.norm() <= delta * (1.0 + 1e-12);
        tally.check(if in_region { margin } else { f64::NEG_INFINITY }, || {
            let mut v = instance();
            v["chain"] = json!(chain);
            v
        });
    }
    tally.report
}

/// `|φ̂(x + d) − q̂(d)| ≤ M₀ + M₁‖d‖ + M₂‖d‖²` on the quadratic problem with
/// curvature `B = sD`, `s ∈ [−1, 1]`.
fn model_error_bound(rng: &mut ChaCha8Rng, instances: usize, m2_scale: f64) -> PropertyReport {
    let mut tally = Tally::new("model_error_bound");
    let problem = quadratic_l1_default();
    let diag = problem.map.curvature(&problem.x0).expect("quadratic map has curvature");
    let n = problem.n();
    let steepest = diag.diagonal().imax();
    for i in 0..instances {
        let x = random_point(rng, &problem);
        let noise = random_noise(rng);
        let (eps_f, eps_jac) = noise_radii(&noise);
        let mut consts = NoiseConstants::new(&problem.constants(), eps_f, eps_jac, n).unwrap();
        consts.m2 *= m2_scale;
        let s = rng.random_range(-1.0..=1.0);
        let b = &diag * s;
        let length = rng.random_range(0.0..1000.0);
        let d = match i % 4 {
            // Along the stiffest coordinate, where the curvature term is tight.
            0 => {
                let mut d = DVector::zeros(n);
                d[steepest] = if rng.random_bool(0.5) { length } else { -length };
                d
            }
            1 => noisy_slp::oracle::sample_ball(rng, n, 1e-2),
            _ => {
                let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let norm = d.norm();
                if norm > 0.0 { d * (length / norm) } else { d }
            }
        };
        let mut oracle = NoisyOracle::new(problem.map.as_ref(), noise, rng.random(), 0).unwrap();
        let (f, j) = oracle.evaluate(&x).unwrap();
        let (f_trial, _) = oracle.evaluate(&(&x + &d)).unwrap();
        let model = LocalModel::new(&problem.spec, &f, &j, Some(&b));
        let actual = problem.spec.eval(f_trial.as_slice()).unwrap();
        let error = (actual - model.quadratic(&d)).abs();
        let bound = consts.model_error_bound(d.norm());
        tally.check(bound - error, || {
            json!({ "x": vector(&x), "d": vector(&d), "s": s, "noise": noise, "error": error, "bound": bound, "m2": consts.m2 })
        });
    }
    tally.report
}

/// `|ℓ̂(d) − ℓ̂(0)| ≤ L^ℓ ‖d‖_∞`.
fn linear_model_lipschitz(rng: &mut ChaCha8Rng, instances: usize) -> PropertyReport {
    let mut tally = Tally::new("linear_model_lipschitz");
    for _ in 0..instances {
        let problem = benchmark(rng);
        let x = random_point(rng, &problem);
        let noise = random_noise(rng);
        let (eps_f, eps_jac) = noise_radii(&noise);
        let consts = NoiseConstants::new(&problem.constants(), eps_f, eps_jac, problem.n()).unwrap();
        let mut oracle = NoisyOracle::new(problem.map.as_ref(), noise, rng.random(), 0).unwrap();
        let (f, j) = oracle.evaluate(&x).unwrap();
        let radius = 10f64.powf(rng.random_range(-3.0..1.0));
        let d = DVector::from_fn(problem.n(), |_, _| rng.random_range(-radius..=radius));
        let model = LocalModel::new(&problem.spec, &f, &j, None);
        let change = model.linear_decrease(&d).abs();
        let bound = consts.l_ell * d.amax();
        tally.check(bound - change, || {
            json!({ "problem": problem.name, "x": vector(&x), "d": vector(&d), "noise": noise, "change": change, "bound": bound })
        });
    }
    tally.report
}

/// `‖d_C‖_LP ≥ min(Δ/γ, Δ^LP, Ψ̂(1)/L^ℓ, min(1, 1/Δ^LP)·2(1−η)τΨ̂(1)/(βγ²))`.
fn cauchy_step_bound(rng: &mut ChaCha8Rng, instances: usize) -> PropertyReport {
    let mut tally = Tally::new("cauchy_step_bound");
    let config = SolverConfig::default();
    for _ in 0..instances {
        let problem = benchmark(rng);
        let x = random_point(rng, &problem);
        let noise = random_noise(rng);
        let (eps_f, eps_jac) = noise_radii(&noise);
        let consts = NoiseConstants::new(&problem.constants(), eps_f, eps_jac, problem.n()).unwrap();
        let delta = 10f64.powf(rng.random_range(-3.0..1.0));
        let delta_lp = 10f64.powf(rng.random_range(-3.0..1.0));
        let mut oracle = NoisyOracle::new(problem.map.as_ref(), noise, rng.random(), 0).unwrap();
        let (f, j) = oracle.evaluate(&x).unwrap();
        let b = problem.map.curvature(&x);
        let model = LocalModel::new(&problem.spec, &f, &j, b.as_ref());
        let instance = || json!({ "problem": problem.name, "x": vector(&x), "noise": noise, "delta": delta, "delta_lp": delta_lp });
        let steps = solve_subproblem(&problem.spec, &f, &j, delta_lp).and_then(|lp| {
            let psi_one = criticality(&problem.spec, &f, &j, 1.0)?;
            Ok((cauchy_search(&model, &lp.d, delta, &config)?, psi_one))
        });
        let Ok(((_, d_c), psi_one)) = steps else {
            tally.fail(instance());
            continue;
        };
        if psi_one < config.tol_criticality {
            continue;
        }
        let bound = cauchy_norm_lower_bound(&consts, &config, delta, delta_lp, psi_one);
        let norm = d_c.amax();
        tally.check(norm - bound, || {
            let mut v = instance();
            v["norm"] = json!(norm);
            v["bound"] = json!(bound);
            v
        });
    }
    tally.report
}

/// `|Ψ̂(1) − Ψ(1)| ≤ L^ω(ε_F + ε_F′)` at fixed points while the noise halves
/// over eight levels; with no noise the two agree exactly.
///
/// A worst-case argument only gives `L^ω(2ε_F + √n ε_F′)`: the noise in
/// `F̂` mostly cancels between `ω(F̂)` and the LP minimum.
fn epi_convergence(rng: &mut ChaCha8Rng, points: usize) -> PropertyReport {
    let mut tally = Tally::new("epi_convergence");
    let problem = quadratic_l1_default();
    let l_omega = problem.constants().l_omega;
    for _ in 0..points {
        let x = random_point(rng, &problem);
        let (f, j) = (problem.map.eval(&x), problem.map.jacobian(&x));
        let exact = criticality(&problem.spec, &f, &j, 1.0).unwrap();
        let mut last_bound = f64::INFINITY;
        for level in 0..=8 {
            let eps = if level == 8 { 0.0 } else { 0.1 * 0.5f64.powi(level) };
            let noise = NoiseModel::BallUniform { eps_f: eps, eps_jac: eps };
            let mut oracle = NoisyOracle::new(problem.map.as_ref(), noise, rng.random(), 0).unwrap();
            let (f_hat, j_hat) = oracle.evaluate(&x).unwrap();
            let noisy = criticality(&problem.spec, &f_hat, &j_hat, 1.0).unwrap();
            let bound = l_omega * (eps + eps);
            let gap = (noisy - exact).abs();
            let shrinking = bound < last_bound;
            last_bound = bound;
            let margin = if level == 8 {
                if gap == 0.0 { 0.0 } else { -gap }
            } else if shrinking {
                bound - gap
            } else {
                f64::NEG_INFINITY
            };
            tally.check(margin, || json!({ "x": vector(&x), "eps": eps, "exact": exact, "noisy": noisy, "bound": bound }));
        }
    }
    tally.report
}

fn random_lp<R: Rng>(rng: &mut R) -> LpProblem {
    let n = rng.random_range(1..=4);
    let objective: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.1..3.0)).collect();
    let mut lp = LpProblem::new(objective).with_bounds(lower, upper);
    for _ in 0..rng.random_range(0..=6) {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        lp = lp.with_ub_row(LinearRow::dense(&coeffs, rng.random_range(-1.0..2.0)));
    }
    if n > 1 && rng.random_bool(0.3) {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        lp = lp.with_eq_row(LinearRow::dense(&coeffs, rng.random_range(-0.5..0.5)));
    }
    lp
}

/// The simplex optimum equals the best vertex of a brute-force enumeration.
fn lp_matches_enumeration(rng: &mut ChaCha8Rng, instances: usize) -> PropertyReport {
    let mut tally = Tally::with_tolerance("lp_matches_enumeration", 1e-9);
    for _ in 0..instances {
        let lp = random_lp(rng);
        let sol = solve_lp(&lp);
        let reference = enumerate_vertices(&lp, 1e-9);
        let margin = match (&sol, &reference) {
            (Ok(s), Some((best, _))) if s.status == LpStatus::Optimal => -(s.objective - best).abs(),
            (Ok(s), None) if s.status == LpStatus::Infeasible => 0.0,
            _ => f64::NEG_INFINITY,
        };
        tally.check(margin, || {
            json!({
                "objective": lp.objective,
                "lower": lp.lower,
                "upper": lp.upper,
                "ub_rows": lp.ub_rows.iter().map(|r| json!({ "coeffs": r.coeffs, "rhs": r.rhs })).collect::<Vec<_>>(),
                "eq_rows": lp.eq_rows.iter().map(|r| json!({ "coeffs": r.coeffs, "rhs": r.rhs })).collect::<Vec<_>>(),
                "simplex": sol.as_ref().ok().map(|s| s.objective),
                "enumeration": reference.as_ref().map(|r| r.0),
            })
        });
    }
    tally.report
}
