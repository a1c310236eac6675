//! Mean-reverting SDE `dx = theta_t (mu - x) dt + sigma_t dw` with
//! `sigma_t^2 = 2 lambda^2 theta_t`.
//!
//! The clean image is the initial state `x0` and the degraded image is the
//! mean `mu`. Marginals are Gaussian with mean `mu + (x0 - mu) e^{-theta_bar_t}`
//! and pixel-shared variance `lambda^2 (1 - e^{-2 theta_bar_t})`, which gives
//! closed forms for the score, the optimal reverse state and the one-step
//! posterior used by [`posterior_sample_loop`].

mod predictor;
mod schedule;

pub use predictor::{oracle_noise_predictor, NoisePredictor, OraclePredictor, PerturbedOracle};
pub use schedule::{NoiseSchedule, ScheduleRow, ScheduleShape};

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalParams {
    pub mean: ImageBuffer,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorParams {
    pub mean: ImageBuffer,
    pub variance: f64,
}

/// Starting state of a reverse-time run.
#[derive(Debug, Clone)]
pub enum Init {
    /// `x_T = mu + sqrt(v_T) eps`, drawn from the sampler's stream.
    FromLqNoise,
    Given(ImageBuffer),
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    /// Clamp every x0 estimate to `[0, 1]`.
    pub clamp_x0: bool,
    pub keep_trajectory: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            clamp_x0: true,
            keep_trajectory: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub x0: ImageBuffer,
    /// States `x_T, x_{T-1}, ..., x_0` when requested.
    pub trajectory: Option<Vec<ImageBuffer>>,
}

pub fn marginal_params(
    sched: &NoiseSchedule,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
) -> Result<MarginalParams> {
    sched.check_time(t)?;
    let k = sched.mean_coeff(t);
    let mean = x0.zip_map(mu, |a, m| m + (a - m) * k)?;
    Ok(MarginalParams {
        mean,
        variance: sched.variance(t),
    })
}

/// Standard normal field shaped like `like`, drawn in storage order.
pub fn draw_noise(like: &ImageBuffer, rng: &mut impl Rng) -> ImageBuffer {
    let (h, w, c) = like.shape();
    ImageBuffer::new(h, w, c, rng::normals(rng, h * w * c)).expect("normal draws are finite")
}

pub fn forward_sample(
    sched: &NoiseSchedule,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
    rng: &mut impl Rng,
) -> Result<ImageBuffer> {
    x0.check_same_shape(mu)?;
    let eps = draw_noise(x0, rng);
    forward_sample_with_noise(sched, x0, mu, t, &eps)
}

/// `m_t + sqrt(v_t) eps` for a caller-supplied `eps`.
pub fn forward_sample_with_noise(
    sched: &NoiseSchedule,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
    eps: &ImageBuffer,
) -> Result<ImageBuffer> {
    let m = marginal_params(sched, x0, mu, t)?;
    let std = m.variance.sqrt();
    m.mean.zip_map(eps, |mean, e| mean + std * e)
}

/// Exact score `-(x_t - m_t) / v_t` of the Gaussian marginal.
pub fn analytic_score(
    sched: &NoiseSchedule,
    x_t: &ImageBuffer,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
) -> Result<ImageBuffer> {
    sched.check_step(t)?;
    let m = marginal_params(sched, x0, mu, t)?;
    let v = m.variance;
    x_t.zip_map(&m.mean, |x, mean| -(x - mean) / v)
}

/// Euler-Maruyama integration of the forward SDE with `substeps_per_unit`
/// substeps per unit time. Returns the states at `t = 0..=T`.
pub fn euler_forward_simulate(
    sched: &NoiseSchedule,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    substeps_per_unit: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ImageBuffer>> {
    let mut states = Vec::with_capacity(sched.num_steps() + 1);
    euler_forward_impl(sched, x0, mu, substeps_per_unit, rng, |x| {
        states.push(x.clone())
    })?;
    Ok(states)
}

/// Same integration as [`euler_forward_simulate`], keeping only `x_T`.
pub fn euler_forward_terminal(
    sched: &NoiseSchedule,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    substeps_per_unit: usize,
    rng: &mut impl Rng,
) -> Result<ImageBuffer> {
    let mut last = None;
    euler_forward_impl(sched, x0, mu, substeps_per_unit, rng, |x| {
        last = Some(x.clone())
    })?;
    Ok(last.expect("at least the initial state is emitted"))
}

fn euler_forward_impl(
    sched: &NoiseSchedule,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    substeps_per_unit: usize,
    rng: &mut impl Rng,
    mut emit: impl FnMut(&ImageBuffer),
) -> Result<()> {
    if substeps_per_unit == 0 {
        return Err(crate::error::invalid("substeps_per_unit", "must be at least 1"));
    }
    x0.check_same_shape(mu)?;
    let (h, w, c) = x0.shape();
    let mut x = x0.data().to_vec();
    let mu = mu.data();
    let dt = 1.0 / substeps_per_unit as f64;
    emit(x0);
    for t in 1..=sched.num_steps() {
        // theta is piecewise constant on (t-1, t].
        let theta = sched.step_theta(t);
        let drift = theta * dt;
        let diffusion = (2.0 * sched.lambda().powi(2) * theta * dt).sqrt();
        for _ in 0..substeps_per_unit {
            for (xi, &m) in x.iter_mut().zip(mu) {
                *xi += drift * (m - *xi) + diffusion * rng::normal(rng);
            }
        }
        emit(&ImageBuffer::new(h, w, c, x.clone())?);
    }
    Ok(())
}

/// One backward Euler-Maruyama step of the reverse-time SDE
/// `dx = [theta_t (mu - x) - sigma_t^2 score] dt + sigma_t dw_hat` over the
/// unit interval `(t - 1, t]`.
pub fn reverse_sde_step(
    sched: &NoiseSchedule,
    x_t: &ImageBuffer,
    mu: &ImageBuffer,
    score: &ImageBuffer,
    t: usize,
    rng: &mut impl Rng,
    noise_free: bool,
) -> Result<ImageBuffer> {
    sched.check_step(t)?;
    let theta = sched.step_theta(t);
    let sigma_sq = sched.sigma_sq(t);
    let next = x_t.zip3_map(mu, score, |x, m, s| x - (theta * (m - x) - sigma_sq * s))?;
    if noise_free {
        return Ok(next);
    }
    let sigma = sigma_sq.sqrt();
    let noise = draw_noise(x_t, rng);
    next.zip_map(&noise, |x, e| x + sigma * e)
}

/// The most likely reverse state `x*_{t-1}` given `x_t` and the clean image.
pub fn optimal_reverse_step(
    sched: &NoiseSchedule,
    x_t: &ImageBuffer,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
) -> Result<ImageBuffer> {
    sched.check_step(t)?;
    if t == 1 {
        // Point mass at x0; skipping the arithmetic keeps it bit-exact.
        x_t.check_same_shape(x0)?;
        x_t.check_same_shape(mu)?;
        return Ok(x0.clone());
    }
    let (a, b) = sched.posterior_coeffs(t);
    x_t.zip3_map(x0, mu, |x, c, m| a * (x - m) + b * (c - m) + m)
}

/// Gaussian posterior `p(x_{t-1} | x_t, x0)`. The mean shares its
/// implementation with [`optimal_reverse_step`].
pub fn posterior_params(
    sched: &NoiseSchedule,
    x_t: &ImageBuffer,
    x0: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
) -> Result<PosteriorParams> {
    Ok(PosteriorParams {
        mean: optimal_reverse_step(sched, x_t, x0, mu, t)?,
        variance: sched.posterior_variance(t),
    })
}

/// Inverts the reparameterization `x_t = m_t + sqrt(v_t) eps` with a predicted
/// noise. Errors in the prediction are amplified by `e^{theta_bar_t} sqrt(v_t)`.
pub fn estimate_x0(
    sched: &NoiseSchedule,
    x_t: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
    predictor: &impl NoisePredictor,
    clamp: bool,
) -> Result<ImageBuffer> {
    sched.check_step(t)?;
    let eps = predictor.predict(x_t, mu, t)?;
    if eps.shape() != x_t.shape() {
        return Err(Error::Predictor(format!(
            "output shape {:?} != input shape {:?}",
            eps.shape(),
            x_t.shape()
        )));
    }
    if eps.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Predictor("non-finite noise estimate".into()));
    }
    estimate_x0_from_noise(sched, x_t, mu, t, &eps, clamp)
}

pub fn estimate_x0_from_noise(
    sched: &NoiseSchedule,
    x_t: &ImageBuffer,
    mu: &ImageBuffer,
    t: usize,
    eps: &ImageBuffer,
    clamp: bool,
) -> Result<ImageBuffer> {
    sched.check_step(t)?;
    let growth = sched.cum_theta(t).exp();
    let std = sched.variance(t).sqrt();
    let x0 = x_t.zip3_map(mu, eps, |x, m, e| growth * (x - m - std * e) + m)?;
    Ok(if clamp { x0.clamp01() } else { x0 })
}

fn initial_state(
    sched: &NoiseSchedule,
    mu: &ImageBuffer,
    rng: &mut impl Rng,
    init: Init,
) -> Result<ImageBuffer> {
    match init {
        Init::FromLqNoise => {
            let std = sched.variance(sched.num_steps()).sqrt();
            let eps = draw_noise(mu, rng);
            mu.zip_map(&eps, |m, e| m + std * e)
        }
        Init::Given(x) => {
            mu.check_same_shape(&x)?;
            Ok(x)
        }
    }
}

/// Restores `x0` by drawing `x_{t-1}` from the posterior around the current
/// x0 estimate for `t = T..1`. The last step has zero variance, so the result
/// is the final posterior mean.
pub fn posterior_sample_loop(
    sched: &NoiseSchedule,
    mu: &ImageBuffer,
    predictor: &impl NoisePredictor,
    rng: &mut impl Rng,
    init: Init,
    opts: SampleOptions,
) -> Result<SampleOutput> {
    let mut x = initial_state(sched, mu, rng, init)?;
    let mut trajectory = opts.keep_trajectory.then(|| vec![x.clone()]);
    for t in (1..=sched.num_steps()).rev() {
        let x0_hat = estimate_x0(sched, &x, mu, t, predictor, opts.clamp_x0)?;
        let post = posterior_params(sched, &x, &x0_hat, mu, t)?;
        x = if post.variance > 0.0 {
            let std = post.variance.sqrt();
            let eps = draw_noise(mu, rng);
            post.mean.zip_map(&eps, |m, e| m + std * e)?
        } else {
            post.mean
        };
        if let Some(tr) = trajectory.as_mut() {
            tr.push(x.clone());
        }
    }
    Ok(SampleOutput { x0: x, trajectory })
}

/// Where the reverse SDE keeps its Brownian term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReverseNoise {
    Every,
    /// Every step except the one into `t = 0`.
    #[default]
    AllButFinal,
    /// Deterministic drift-only integration.
    Never,
}

/// Restores `x0` by integrating the reverse-time SDE with the score implied by
/// the predictor, `-eps / sqrt(v_t)`.
pub fn reverse_sde_loop(
    sched: &NoiseSchedule,
    mu: &ImageBuffer,
    predictor: &impl NoisePredictor,
    rng: &mut impl Rng,
    init: Init,
    noise: ReverseNoise,
    keep_trajectory: bool,
) -> Result<SampleOutput> {
    let mut x = initial_state(sched, mu, rng, init)?;
    let mut trajectory = keep_trajectory.then(|| vec![x.clone()]);
    for t in (1..=sched.num_steps()).rev() {
        let inv_std = 1.0 / sched.variance(t).sqrt();
        let score = predictor.predict(&x, mu, t)?.map(|e| -e * inv_std)?;
        let quiet = match noise {
            ReverseNoise::Every => false,
            ReverseNoise::AllButFinal => t == 1,
            ReverseNoise::Never => true,
        };
        x = reverse_sde_step(sched, &x, mu, &score, t, rng, quiet)?;
        if let Some(tr) = trajectory.as_mut() {
            tr.push(x.clone());
        }
    }
    Ok(SampleOutput { x0: x, trajectory })
}

#[cfg(test)]
mod tests;
