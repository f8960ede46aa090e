//! Seeded, bounded-noise evaluation of a smooth map and its Jacobian.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Lipschitz and curvature constants of a map, valid on the region the
/// problem declares (typically a box around the start and the solution).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MapConstants {
    /// Bound on `‖F′(x)‖`.
    pub l_f: Option<f64>,
    /// Lipschitz constant of `F′`.
    pub l_fprime: Option<f64>,
    /// Bound on `⟨d, B d⟩ / ‖d‖²` for the curvature the map provides.
    pub beta: Option<f64>,
}

/// Reference image for the redraw noise model.
///
/// A map exposing one promises that its first component is
/// `½‖x − y‖²` with `y = values` (column-major, `rows × cols`), so the oracle
/// can recompute that component against a perturbed reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTarget {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// A twice continuously differentiable map `F : Rⁿ → Rᵖ`.
pub trait SmoothMap: Send + Sync {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Curvature `B(x)` for the quadratic model, if the map has one.
    fn curvature(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn constants(&self) -> MapConstants {
        MapConstants::default()
    }

    fn image_target(&self) -> Option<&ImageTarget> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum NoiseModel {
    NoNoise,
    /// Uniform perturbations in Euclidean balls: radius `eps_f` for `F`,
    /// Frobenius radius `eps_jac` for `F′`.
    BallUniform { eps_f: f64, eps_jac: f64 },
    /// The reference image is redrawn at every evaluation with entrywise
    /// uniform noise in `[−eps_img, eps_img]`, clipped back to `[0, 1]`.
    ImageRedraw { eps_img: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::NoNoise => true,
            NoiseModel::BallUniform { eps_f, eps_jac } => {
                eps_f >= 0.0 && eps_jac >= 0.0 && eps_f.is_finite() && eps_jac.is_finite()
            }
            NoiseModel::ImageRedraw { eps_img } => eps_img >= 0.0 && eps_img.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid noise model {self:?}")))
        }
    }

    pub fn is_noiseless(&self) -> bool {
        match *self {
            NoiseModel::NoNoise => true,
            NoiseModel::BallUniform { eps_f, eps_jac } => eps_f == 0.0 && eps_jac == 0.0,
            NoiseModel::ImageRedraw { eps_img } => eps_img == 0.0,
        }
    }
}

/// Bounds `(ε_F, ε_F′)` on the perturbations the model can produce.
///
/// `image_dims` is required for [`NoiseModel::ImageRedraw`].
pub fn noise_levels(noise: &NoiseModel, image_dims: Option<(usize, usize)>) -> Result<(f64, f64)> {
    match *noise {
        NoiseModel::NoNoise => Ok((0.0, 0.0)),
        NoiseModel::BallUniform { eps_f, eps_jac } => Ok((eps_f, eps_jac)),
        NoiseModel::ImageRedraw { eps_img } => {
            let (m, n) = image_dims.ok_or(Error::UnsupportedNoise("ImageRedraw without image dimensions"))?;
            let pixels = (m * n) as f64;
            Ok(((eps_img + 0.5 * eps_img * eps_img) * pixels, eps_img * pixels.sqrt()))
        }
    }
}

/// A uniform sample from the closed Euclidean ball of the given radius.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> DVector<f64> {
    if radius == 0.0 || dim == 0 {
        return DVector::zeros(dim);
    }
    loop {
        let direction = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = direction.norm();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let scale = radius * u.powf(1.0 / dim as f64) / norm;
        let mut v = direction * scale;
        // Guard the hard bound against the last ulp of rounding.
        let len = v.norm();
        if len > radius {
            v *= radius / len;
        }
        return v;
    }
}

/// Noisy values `(F̂(x), F̂′(x))` drawn once.
pub fn noisy_eval<R: Rng + ?Sized>(
    map: &dyn SmoothMap,
    noise: &NoiseModel,
    rng: &mut R,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_dim(map.n(), x.len(), "oracle input")?;
    let mut f = map.eval(x);
    let mut jac = map.jacobian(x);
    match *noise {
        NoiseModel::NoNoise => {}
        NoiseModel::BallUniform { eps_f, eps_jac } => {
            f += sample_ball(rng, f.len(), eps_f);
            if eps_jac > 0.0 {
                let delta = sample_ball(rng, jac.len(), eps_jac);
                jac += DMatrix::from_column_slice(jac.nrows(), jac.ncols(), delta.as_slice());
            }
        }
        NoiseModel::ImageRedraw { eps_img } => {
            let target = map
                .image_target()
                .ok_or(Error::UnsupportedNoise("ImageRedraw"))?;
            check_dim(target.values.len(), x.len(), "image target")?;
            let mut fidelity = 0.0;
            for (j, (&xi, &yi)) in x.iter().zip(&target.values).enumerate() {
                let y_hat = if eps_img > 0.0 {
                    (yi + rng.random_range(-eps_img..=eps_img)).clamp(0.0, 1.0)
                } else {
                    yi
                };
                let r = xi - y_hat;
                fidelity += r * r;
                jac[(0, j)] = r;
            }
            f[0] = 0.5 * fidelity;
        }
    }
    Ok((f, jac))
}

/// A map paired with a noise model and its own random stream.
pub struct NoisyOracle<'a> {
    map: &'a dyn SmoothMap,
    noise: NoiseModel,
    rng: ChaCha8Rng,
    evaluations: usize,
}

impl<'a> NoisyOracle<'a> {
    /// Stream `stream` of the generator seeded with `seed`; distinct streams
    /// are independent, so parallel runs stay reproducible.
    pub fn new(map: &'a dyn SmoothMap, noise: NoiseModel, seed: u64, stream: u64) -> Result<Self> {
        noise.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self {
            map,
            noise,
            rng,
            evaluations: 0,
        })
    }

    pub fn map(&self) -> &'a dyn SmoothMap {
        self.map
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn evaluate(&mut self, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.evaluations += 1;
        noisy_eval(self.map, &self.noise, &mut self.rng, x)
    }

    pub fn exact(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (self.map.eval(x), self.map.jacobian(x))
    }

    pub fn noise_levels(&self) -> Result<(f64, f64)> {
        noise_levels(&self.noise, self.map.image_target().map(|t| (t.rows, t.cols)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_radius_ball_is_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_ball(&mut rng, 4, 0.0), DVector::zeros(4));
    }

    #[test]
    fn ball_mean_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples = 100_000;
        let mut total = 0.0;
        for _ in 0..samples {
            let v = sample_ball(&mut rng, 3, 1.0);
            let r = v.norm();
            assert!(r <= 1.0);
            total += r;
        }
        let mean = total / samples as f64;
        assert!((mean - 0.75).abs() < 0.0075, "mean radius {mean}");
    }

    #[test]
    fn noise_level_formulas() {
        assert_eq!(noise_levels(&NoiseModel::NoNoise, None).unwrap(), (0.0, 0.0));
        let (ef, ej) = noise_levels(&NoiseModel::ImageRedraw { eps_img: 0.1 }, Some((32, 32))).unwrap();
        assert!((ef - 107.52).abs() < 1e-9);
        assert!((ej - 3.2).abs() < 1e-12);
        let ball = NoiseModel::BallUniform { eps_f: 1e-1, eps_jac: 1e-5 };
        assert_eq!(noise_levels(&ball, None).unwrap(), (1e-1, 1e-5));
        assert!(noise_levels(&NoiseModel::ImageRedraw { eps_img: 0.1 }, None).is_err());
    }

    #[test]
    fn invalid_noise_is_rejected() {
        assert!(NoiseModel::BallUniform { eps_f: -1.0, eps_jac: 0.0 }.validate().is_err());
        assert!(NoiseModel::ImageRedraw { eps_img: f64::NAN }.validate().is_err());
    }
}
