use crate::error::Result;
use crate::image::ImageBuffer;
use crate::rng;

use super::{marginal_params, NoiseSchedule};

/// Evaluates the noise estimate for a diffusion state `x_t` at step `t`.
///
/// This is where a trained network plugs in; the crate ships analytic oracles.
pub trait NoisePredictor {
    fn predict(&self, x_t: &ImageBuffer, mu: &ImageBuffer, t: usize) -> Result<ImageBuffer>;
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for &P {
    fn predict(&self, x_t: &ImageBuffer, mu: &ImageBuffer, t: usize) -> Result<ImageBuffer> {
        (**self).predict(x_t, mu, t)
    }
}

/// Knows the clean image and returns the exact noise `(x_t - m_t) / sqrt(v_t)`.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    schedule: NoiseSchedule,
    x0: ImageBuffer,
}

impl OraclePredictor {
    pub fn new(schedule: NoiseSchedule, x0: ImageBuffer) -> Self {
        Self { schedule, x0 }
    }
}

impl NoisePredictor for OraclePredictor {
    fn predict(&self, x_t: &ImageBuffer, mu: &ImageBuffer, t: usize) -> Result<ImageBuffer> {
        self.schedule.check_step(t)?;
        let m = marginal_params(&self.schedule, &self.x0, mu, t)?;
        let std = m.variance.sqrt();
        x_t.zip_map(&m.mean, |x, mean| (x - mean) / std)
    }
}

pub fn oracle_noise_predictor(schedule: &NoiseSchedule, x0: &ImageBuffer) -> OraclePredictor {
    OraclePredictor::new(schedule.clone(), x0.clone())
}

/// Oracle plus i.i.d. Gaussian error of std `sigma` on every query.
///
/// The error field for step `t` comes from stream `(seed, t)`, so repeated
/// queries at the same step see the same perturbation.
#[derive(Debug, Clone)]
pub struct PerturbedOracle {
    oracle: OraclePredictor,
    sigma: f64,
    seed: u64,
}

impl PerturbedOracle {
    pub fn new(oracle: OraclePredictor, sigma: f64, seed: u64) -> Self {
        Self {
            oracle,
            sigma,
            seed,
        }
    }
}

impl NoisePredictor for PerturbedOracle {
    fn predict(&self, x_t: &ImageBuffer, mu: &ImageBuffer, t: usize) -> Result<ImageBuffer> {
        let exact = self.oracle.predict(x_t, mu, t)?;
        let mut stream = rng::stream(self.seed, rng::ids::PREDICTOR_PERTURBATION + t as u64);
        let (h, w, c) = exact.shape();
        let data = exact
            .into_data()
            .into_iter()
            .map(|e| e + self.sigma * rng::normal(&mut stream))
            .collect();
        ImageBuffer::new(h, w, c, data)
    }
}
