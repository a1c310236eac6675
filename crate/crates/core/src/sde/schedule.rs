use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Profile of the per-step reversion integrals before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleShape {
    Uniform,
    /// Cosine ramp with a floor: small steps near the clean end, larger toward `T`.
    #[default]
    FlattenedCosine,
}

impl std::str::FromStr for ScheduleShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "flattened-cosine" => Ok(Self::FlattenedCosine),
            other => Err(invalid("shape", format!("unknown schedule shape `{other}`"))),
        }
    }
}

const COSINE_OFFSET: f64 = 0.008;
const COSINE_FLOOR: f64 = 0.05;

/// Discrete coefficients of the mean-reverting SDE.
///
/// Only `theta` and `lambda` are stored. The diffusion coefficient is always
/// derived as `sigma_t^2 = 2 lambda^2 theta_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    /// `step_theta[i - 1]` is the integral of theta over `(i - 1, i]`.
    step_theta: Vec<f64>,
    /// `cum_theta[t]`, with `cum_theta[0] = 0`.
    cum_theta: Vec<f64>,
    lambda: f64,
}

impl NoiseSchedule {
    /// Builds a schedule whose terminal mean coefficient `exp(-cum_theta[T])`
    /// equals `terminal_decay`.
    pub fn build(
        num_steps: usize,
        lambda: f64,
        terminal_decay: f64,
        shape: ScheduleShape,
    ) -> Result<Self> {
        if num_steps == 0 {
            return Err(invalid("num_steps", "must be at least 1"));
        }
        if !(terminal_decay > 0.0 && terminal_decay < 1.0) {
            return Err(invalid(
                "terminal_decay",
                format!("{terminal_decay} is outside (0, 1)"),
            ));
        }
        let total = -terminal_decay.ln();
        let step_theta = match shape {
            ScheduleShape::Uniform => vec![total / num_steps as f64; num_steps],
            ScheduleShape::FlattenedCosine => {
                let weights: Vec<f64> = (1..=num_steps)
                    .map(|i| cosine_weight((i as f64 - 0.5) / num_steps as f64))
                    .collect();
                let sum: f64 = weights.iter().sum();
                weights.iter().map(|w| w * total / sum).collect()
            }
        };
        Self::from_step_thetas(step_theta, lambda)
    }

    /// Builds a schedule from explicit per-step integrals.
    pub fn from_step_thetas(step_theta: Vec<f64>, lambda: f64) -> Result<Self> {
        if step_theta.is_empty() {
            return Err(invalid("num_steps", "must be at least 1"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be positive")));
        }
        if let Some(bad) = step_theta.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid("step_theta", format!("{bad} must be positive")));
        }
        let mut cum_theta = Vec::with_capacity(step_theta.len() + 1);
        cum_theta.push(0.0);
        let mut acc = 0.0;
        for &th in &step_theta {
            acc += th;
            cum_theta.push(acc);
        }
        Ok(Self {
            step_theta,
            cum_theta,
            lambda,
        })
    }

    pub fn num_steps(&self) -> usize {
        self.step_theta.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Integral of theta over `(t - 1, t]`, for `1 <= t <= T`.
    pub fn step_theta(&self, t: usize) -> f64 {
        self.step_theta[t - 1]
    }

    pub fn step_thetas(&self) -> &[f64] {
        &self.step_theta
    }

    pub fn cum_theta(&self, t: usize) -> f64 {
        self.cum_theta[t]
    }

    /// Squared diffusion coefficient on step `t`, integrated over the unit step.
    pub fn sigma_sq(&self, t: usize) -> f64 {
        2.0 * self.lambda * self.lambda * self.step_theta(t)
    }

    /// `exp(-cum_theta[t])`, the weight of `x0 - mu` in the marginal mean.
    pub fn mean_coeff(&self, t: usize) -> f64 {
        (-self.cum_theta[t]).exp()
    }

    /// Marginal variance `lambda^2 (1 - exp(-2 cum_theta[t]))`.
    pub fn variance(&self, t: usize) -> f64 {
        self.lambda * self.lambda * one_minus_exp_neg(2.0 * self.cum_theta[t])
    }

    /// Weights `(a, b)` of `(x_t - mu)` and `(x0 - mu)` in the posterior mean of step `t`.
    pub fn posterior_coeffs(&self, t: usize) -> (f64, f64) {
        let prev = self.cum_theta[t - 1];
        let step = self.step_theta(t);
        let denom = one_minus_exp_neg(2.0 * self.cum_theta[t]);
        let a = one_minus_exp_neg(2.0 * prev) / denom * (-step).exp();
        let b = one_minus_exp_neg(2.0 * step) / denom * (-prev).exp();
        (a, b)
    }

    /// Posterior variance of `x_{t-1}` given `x_t` and `x0`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        let prev = self.cum_theta[t - 1];
        let step = self.step_theta(t);
        self.lambda * self.lambda * one_minus_exp_neg(2.0 * prev) * one_minus_exp_neg(2.0 * step)
            / one_minus_exp_neg(2.0 * self.cum_theta[t])
    }

    pub(crate) fn check_time(&self, t: usize) -> Result<()> {
        if t > self.num_steps() {
            return Err(Error::TimeOutOfRange {
                t,
                max: self.num_steps(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        self.check_time(t)?;
        if t == 0 {
            return Err(Error::SingularTime(0));
        }
        Ok(())
    }

    pub fn table(&self) -> Vec<ScheduleRow> {
        (0..=self.num_steps())
            .map(|t| ScheduleRow {
                t,
                theta_prime: if t == 0 { 0.0 } else { self.step_theta(t) },
                theta_bar: self.cum_theta(t),
                m_coeff: self.mean_coeff(t),
                v_t: self.variance(t),
                beta_tilde_t: if t == 0 {
                    0.0
                } else {
                    self.posterior_variance(t)
                },
            })
            .collect()
    }

    /// Writes `t,theta_prime,theta_bar,m_coeff,v_t,beta_tilde_t` rows. Row 0
    /// reports zero for the per-step quantities, which are undefined there.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,theta_prime,theta_bar,m_coeff,v_t,beta_tilde_t")?;
        for r in self.table() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t, r.theta_prime, r.theta_bar, r.m_coeff, r.v_t, r.beta_tilde_t
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub t: usize,
    pub theta_prime: f64,
    pub theta_bar: f64,
    pub m_coeff: f64,
    pub v_t: f64,
    pub beta_tilde_t: f64,
}

#[inline]
pub(crate) fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

fn cosine_weight(u: f64) -> f64 {
    let f = |u: f64| ((u + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * FRAC_PI_2).cos().powi(2);
    let ramp = 1.0 - f(u) / f(0.0);
    COSINE_FLOOR + (1.0 - COSINE_FLOOR) * ramp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_hits_terminal_decay() {
        let s = NoiseSchedule::build(100, 50.0 / 255.0, 0.005, ScheduleShape::Uniform).unwrap();
        let expected = -(0.005f64).ln() / 100.0;
        for t in 1..=100 {
            assert!((s.step_theta(t) - expected).abs() < 1e-15);
        }
        assert!((s.mean_coeff(100) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn single_step_is_ln2() {
        let s = NoiseSchedule::build(1, 1.0, 0.5, ScheduleShape::Uniform).unwrap();
        assert!((s.step_theta(1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((s.cum_theta(1) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_is_increasing_and_normalized() {
        let s =
            NoiseSchedule::build(100, 0.2, 0.005, ScheduleShape::FlattenedCosine).unwrap();
        assert!((s.mean_coeff(100) - 0.005).abs() < 1e-12);
        assert_eq!(s.cum_theta(0), 0.0);
        for t in 1..=100 {
            assert!(s.step_theta(t) > 0.0);
            assert_eq!(s.cum_theta(t), s.cum_theta(t - 1) + s.step_theta(t));
        }
        assert!(s.step_theta(1) < s.step_theta(100));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NoiseSchedule::build(0, 1.0, 0.5, ScheduleShape::Uniform).is_err());
        assert!(NoiseSchedule::build(10, 0.0, 0.5, ScheduleShape::Uniform).is_err());
        assert!(NoiseSchedule::build(10, -1.0, 0.5, ScheduleShape::Uniform).is_err());
        assert!(NoiseSchedule::build(10, 1.0, 0.0, ScheduleShape::Uniform).is_err());
        assert!(NoiseSchedule::build(10, 1.0, 1.0, ScheduleShape::Uniform).is_err());
        assert!(NoiseSchedule::from_step_thetas(vec![0.1, 0.0], 1.0).is_err());
    }

    #[test]
    fn posterior_variance_boundaries() {
        let s = NoiseSchedule::build(20, 0.3, 0.01, ScheduleShape::FlattenedCosine).unwrap();
        assert_eq!(s.posterior_variance(1), 0.0);
        let (a, b) = s.posterior_coeffs(1);
        assert_eq!(a, 0.0);
        assert_eq!(b, 1.0);
        for t in 2..=20 {
            let beta = s.posterior_variance(t);
            assert!(beta <= s.variance(t - 1));
            assert!(beta <= 0.09 * one_minus_exp_neg(2.0 * s.step_theta(t)));
        }
    }

    #[test]
    fn csv_rows() {
        let s = NoiseSchedule::build(1, 1.0, 0.5, ScheduleShape::Uniform).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,theta_prime,theta_bar,m_coeff,v_t,beta_tilde_t");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,0,1,0,"));
    }
}
