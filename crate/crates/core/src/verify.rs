//! Named invariant checks run by the `verify` command.
//!
//! Each check re-derives its expectation independently of the code path it
//! exercises where one exists (e.g. the posterior is compared against a
//! precision-form product of the transition and prior Gaussians).

use std::time::{Duration, Instant};

use rand::Rng;

use crate::config::RunConfig;
use crate::degrade::{
    apply_pipeline, convolve, jpeg_roundtrip, make_kernel, replay, sample_phase_plan,
    wiener_deconvolve, KernelSpec, OpKind, PipelineConfig,
};
use crate::image::ImageBuffer;
use crate::metrics::{psnr, ssim, SsimParams};
use crate::patterns;
use crate::rng::stream;
use crate::sde::{
    estimate_x0, euler_forward_terminal, forward_sample_with_noise, draw_noise,
    oracle_noise_predictor, optimal_reverse_step, posterior_params, posterior_sample_loop,
    forward_sample, Init, NoiseSchedule, PerturbedOracle, SampleOptions, ScheduleShape,
};

/// Deliberate defects for checking that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Use the posterior variance without its `lambda^2` factor.
    DropLambdaSq,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type CheckFn = fn(Mutation) -> (bool, String);

pub const CHECKS: &[(&str, CheckFn)] = &[
    ("conjugacy", check_conjugacy),
    ("reverse-path", check_reverse_path),
    ("marginal-law", check_marginal_law),
    ("oracle-recovery", check_oracle_recovery),
    ("robustness", check_robustness),
    ("inversion", check_inversion),
    ("pipeline-replay", check_pipeline_replay),
    ("ringing", check_ringing),
    ("jpeg-monotonic", check_jpeg_monotonic),
    ("shuffle-uniformity", check_shuffle_uniformity),
    ("metrics", check_metrics),
    ("defaults", check_defaults),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|(n, _)| *n)
}

/// Runs every check, or only `only` when given. Unknown names yield `None`.
pub fn run_checks(only: Option<&str>, mutation: Mutation) -> Option<Vec<CheckResult>> {
    let selected: Vec<_> = CHECKS
        .iter()
        .filter(|(name, _)| only.is_none_or(|o| o == *name))
        .collect();
    if selected.is_empty() {
        return None;
    }
    Some(
        selected
            .into_iter()
            .map(|(name, f)| {
                let start = Instant::now();
                let (passed, detail) = f(mutation);
                CheckResult {
                    name,
                    passed,
                    detail,
                    elapsed: start.elapsed(),
                }
            })
            .collect(),
    )
}

fn scalar(v: f64) -> ImageBuffer {
    ImageBuffer::scalar(v).expect("finite")
}

/// Posterior of `x_{t-1}` as the normalized product of the prior
/// `N(m_{t-1}, v_{t-1})` and the one-step transition likelihood.
pub fn conjugate_posterior(
    prev: f64,
    step: f64,
    lambda: f64,
    x0: f64,
    xt: f64,
    mu: f64,
) -> (f64, f64) {
    let lam2 = lambda * lambda;
    let decay = (-step).exp();
    let trans_var = lam2 * (1.0 - (-2.0 * step).exp());
    let prior_mean = mu + (x0 - mu) * (-prev).exp();
    let prior_var = lam2 * (1.0 - (-2.0 * prev).exp());
    // x_t - mu = decay (x_{t-1} - mu) + noise
    let precision = 1.0 / prior_var + decay * decay / trans_var;
    let var = 1.0 / precision;
    let mean = var * (prior_mean / prior_var + decay * (xt - mu + decay * mu) / trans_var);
    (mean, var)
}

fn random_tuple(rng: &mut impl Rng) -> (f64, f64, f64, f64, f64, f64) {
    (
        rng.random_range(0.01..4.0),
        rng.random_range(0.001..0.5),
        rng.random_range(0.05..2.0),
        rng.random_range(-1.0..2.0),
        rng.random_range(-1.0..2.0),
        rng.random_range(-1.0..2.0),
    )
}

fn check_conjugacy(m: Mutation) -> (bool, String) {
    let mut rng = stream(0xC0, 0);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (prev, step, lambda, x0, xt, mu) = random_tuple(&mut rng);
        let s = NoiseSchedule::from_step_thetas(vec![prev, step], lambda).expect("valid");
        let p = posterior_params(&s, &scalar(xt), &scalar(x0), &scalar(mu), 2).expect("valid");
        let var = match m {
            Mutation::None => p.variance,
            Mutation::DropLambdaSq => p.variance / (lambda * lambda),
        };
        let (em, ev) = conjugate_posterior(prev, step, lambda, x0, xt, mu);
        worst_mean = worst_mean.max((p.mean[0] - em).abs());
        worst_var = worst_var.max((var - ev).abs());
    }
    (
        worst_mean < 1e-10 && worst_var < 1e-10,
        format!("max |mean err| {worst_mean:.2e}, max |var err| {worst_var:.2e} (tol 1e-10)"),
    )
}

fn check_reverse_path(_: Mutation) -> (bool, String) {
    let mut rng = stream(0xE4, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let steps = rng.random_range(1..200);
        let decay = rng.random_range(0.001..0.5);
        let lambda = rng.random_range(0.05..2.0);
        let shape = if rng.random() { ScheduleShape::Uniform } else { ScheduleShape::FlattenedCosine };
        let s = NoiseSchedule::build(steps, lambda, decay, shape).expect("valid");
        let t = rng.random_range(1..=steps);
        let (x0, xt, mu) = (rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
        let a = optimal_reverse_step(&s, &scalar(xt), &scalar(x0), &scalar(mu), t).expect("valid");
        let b = posterior_params(&s, &scalar(xt), &scalar(x0), &scalar(mu), t).expect("valid");
        worst = worst.max((a[0] - b.mean[0]).abs());
    }
    (worst < 1e-12, format!("max |diff| {worst:.2e} (tol 1e-12)"))
}

pub const MARGINAL_TRAJECTORIES: usize = 100_000;
pub const MARGINAL_SUBSTEPS: usize = 100;

fn check_marginal_law(_: Mutation) -> (bool, String) {
    let s = NoiseSchedule::build(100, 50.0, 0.005, ScheduleShape::FlattenedCosine).expect("valid");
    let n = MARGINAL_TRAJECTORIES;
    let (x0v, muv) = (200.0, 100.0);
    let x0 = ImageBuffer::filled(1, n, 1, x0v).expect("valid");
    let mu = ImageBuffer::filled(1, n, 1, muv).expect("valid");
    let end = euler_forward_terminal(&s, &x0, &mu, MARGINAL_SUBSTEPS, &mut stream(0x3A, 0))
        .expect("valid");
    let mean = end.data().iter().sum::<f64>() / n as f64;
    let var = end.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = s.num_steps();
    let m_t = muv + (x0v - muv) * s.mean_coeff(t);
    let v_t = s.variance(t);
    let mean_err = (mean - m_t).abs() / (x0v - muv);
    let var_err = (var - v_t).abs() / v_t;
    (
        mean_err <= 0.01 && var_err <= 0.03,
        format!(
            "mean {mean:.4} vs {m_t:.4} ({:.3}% of |x0-mu|), var {var:.2} vs {v_t:.2} ({:.3}%)",
            mean_err * 100.0,
            var_err * 100.0
        ),
    )
}

fn default_schedule() -> NoiseSchedule {
    RunConfig::default().schedule.build().expect("default schedule")
}

fn check_oracle_recovery(_: Mutation) -> (bool, String) {
    let s = default_schedule();
    let x0 = patterns::textured(64, 64, 3, 1);
    let mu = x0.map(|v| 0.5 * v + 0.25).expect("finite");
    let oracle = oracle_noise_predictor(&s, &x0);
    let out = posterior_sample_loop(
        &s,
        &mu,
        &oracle,
        &mut stream(0x0A, 0),
        Init::FromLqNoise,
        SampleOptions::default(),
    )
    .expect("valid");
    let max_err = out
        .x0
        .data()
        .iter()
        .zip(x0.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let p = psnr(&out.x0, &x0, 1.0).expect("same shape");
    let x1 = forward_sample(&s, &x0, &mu, 1, &mut stream(0x0B, 0)).expect("valid");
    let post = posterior_params(&s, &x1, &x0, &mu, 1).expect("valid");
    let boundary = post.variance == 0.0 && post.mean == x0;
    (
        max_err < 1e-6 && p > 90.0 && boundary,
        format!("max err {max_err:.2e}, PSNR {p:.1} dB, beta_1 = {}", post.variance),
    )
}

fn check_robustness(_: Mutation) -> (bool, String) {
    let s = default_schedule();
    let mut worst_margin = f64::INFINITY;
    for trial in 0..10u64 {
        let x0 = patterns::textured(64, 64, 3, 100 + trial);
        let mu = x0.map(|v| 0.5 * v + 0.25).expect("finite");
        let mut rng = stream(0xB0 + trial, 0);
        let xt = forward_sample(&s, &x0, &mu, s.num_steps(), &mut rng).expect("valid");
        let noisy = PerturbedOracle::new(oracle_noise_predictor(&s, &x0), 0.1, trial);
        let out = posterior_sample_loop(
            &s,
            &mu,
            &noisy,
            &mut rng,
            Init::Given(xt.clone()),
            SampleOptions::default(),
        )
        .expect("valid");
        let margin = psnr(&out.x0, &x0, 1.0).expect("shape") - psnr(&xt, &x0, 1.0).expect("shape");
        worst_margin = worst_margin.min(margin);
    }
    (worst_margin > 0.0, format!("smallest PSNR gain {worst_margin:.2} dB over 10 trials"))
}

fn check_inversion(_: Mutation) -> (bool, String) {
    let s = default_schedule();
    let x0 = patterns::textured(16, 16, 3, 3);
    let mu = x0.map(|v| 0.7 * v + 0.1).expect("finite");
    let oracle = oracle_noise_predictor(&s, &x0);
    let mut rng = stream(0x1E, 0);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let t = rng.random_range(1..=s.num_steps());
        let eps = draw_noise(&x0, &mut rng);
        let xt = forward_sample_with_noise(&s, &x0, &mu, t, &eps).expect("valid");
        let est = estimate_x0(&s, &xt, &mu, t, &oracle, false).expect("valid");
        for (a, b) in est.data().iter().zip(x0.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    (worst < 1e-10, format!("max |x0 err| {worst:.2e} (tol 1e-10)"))
}

fn check_pipeline_replay(_: Mutation) -> (bool, String) {
    let cfg = PipelineConfig::default();
    let img = patterns::textured(128, 128, 3, 7);
    let mut ok = true;
    for seed in 0..5 {
        let (a, la) = apply_pipeline(&img, &cfg, &mut stream(seed, 0)).expect("pipeline");
        let (b, lb) = apply_pipeline(&img, &cfg, &mut stream(seed, 0)).expect("pipeline");
        let r = replay(&img, &la).expect("replay");
        ok &= a == b && la == lb && r == a;
    }
    (ok, "5 seeds: identical reruns, bit-exact replay".into())
}

/// Max overshoot above the high plateau and below the low plateau, relative to contrast.
pub fn edge_overshoot(img: &ImageBuffer, low: f64, high: f64) -> f64 {
    let max = img.data().iter().cloned().fold(f64::MIN, f64::max);
    let min = img.data().iter().cloned().fold(f64::MAX, f64::min);
    ((max - high).max(low - min)).max(0.0) / (high - low)
}

fn check_ringing(_: Mutation) -> (bool, String) {
    let (low, high) = (0.25, 0.75);
    let img = patterns::step_edge(64, 64, low, high);
    let k = make_kernel(&KernelSpec::Gaussian { sigma: 2.0, size: None }).expect("kernel");
    let blurred = convolve(&img, &k).expect("blur");
    let ringing = wiener_deconvolve(&blurred, &k, 1e-3).expect("wiener");
    let plain = edge_overshoot(&blurred, low, high);
    let rung = edge_overshoot(&ringing, low, high);
    (
        rung >= 0.01 && plain <= 0.001,
        format!("overshoot blurred {:.4}%, deconvolved {:.2}%", plain * 100.0, rung * 100.0),
    )
}

fn check_jpeg_monotonic(_: Mutation) -> (bool, String) {
    let img = patterns::textured(64, 64, 3, 9);
    let p = |q| psnr(&jpeg_roundtrip(&img, q, true).expect("jpeg"), &img, 1.0).expect("shape");
    let (p90, p50, p20) = (p(90), p(50), p(20));
    (
        p90 > p50 && p50 > p20,
        format!("q90 {p90:.2} dB, q50 {p50:.2} dB, q20 {p20:.2} dB"),
    )
}

/// Index of a permutation of `[Blur, Resize, Noise, Jpeg]` in `0..24`.
pub fn permutation_index(order: &[OpKind]) -> usize {
    let mut remaining = vec![OpKind::Blur, OpKind::Resize, OpKind::Noise, OpKind::Jpeg];
    let mut idx = 0;
    for k in order {
        let pos = remaining.iter().position(|r| r == k).expect("known op");
        idx = idx * remaining.len() + pos;
        remaining.remove(pos);
    }
    idx
}

fn check_shuffle_uniformity(_: Mutation) -> (bool, String) {
    let mut cfg = PipelineConfig::default().with_probability(1.0);
    cfg.phases.truncate(1);
    cfg.wiener.probability = 0.0;
    let n = 10_000u64;
    let mut counts = [0u64; 24];
    for seed in 0..n {
        let plan = sample_phase_plan(&cfg, &mut stream(seed, 0)).expect("plan");
        let order: Vec<_> = plan.entries.iter().map(|e| e.op.kind()).collect();
        counts[permutation_index(&order)] += 1;
    }
    let p = 1.0 / 24.0;
    let expected = n as f64 * p;
    let bound = 3.0 * (n as f64 * p * (1.0 - p)).sqrt();
    let worst = counts
        .iter()
        .map(|&c| (c as f64 - expected).abs())
        .fold(0.0, f64::max);
    (
        worst <= bound,
        format!(
            "counts {}..{}, max |dev| {worst:.1} vs 3 sigma {bound:.1}",
            counts.iter().min().unwrap(),
            counts.iter().max().unwrap()
        ),
    )
}

fn check_metrics(_: Mutation) -> (bool, String) {
    let a = patterns::textured(32, 32, 3, 2);
    let identity = psnr(&a, &a, 1.0).expect("shape") == f64::INFINITY;
    let gray = ImageBuffer::filled(16, 16, 3, 0.5).expect("valid");
    let shifted = gray.map(|v| v + 1.0 / 255.0).expect("finite");
    let one_code = psnr(&gray, &shifted, 1.0).expect("shape");
    let ssim_id = ssim(&a, &a, &SsimParams::default()).expect("ssim") == 1.0;
    let (x, y) = (0.4, 0.5);
    let ca = ImageBuffer::filled(11, 11, 1, x).expect("valid");
    let cb = ImageBuffer::filled(11, 11, 1, y).expect("valid");
    let c1 = 0.01f64.powi(2);
    let single = ssim(&ca, &cb, &SsimParams::default()).expect("ssim");
    let expected = (2.0 * x * y + c1) / (x * x + y * y + c1);
    let ok = identity && (one_code - 48.13).abs() <= 0.01 && ssim_id && (single - expected).abs() < 1e-9;
    (
        ok,
        format!("psnr(a,a)=inf: {identity}, 1/255 offset {one_code:.4} dB, ssim(a,a)=1: {ssim_id}, window err {:.1e}", (single - expected).abs()),
    )
}

fn check_defaults(_: Mutation) -> (bool, String) {
    let cfg = RunConfig::default();
    let ok = cfg.schedule.steps == 100 && cfg.schedule.lambda == 50.0 && cfg.patch_size == 256;
    (
        ok,
        format!(
            "steps {}, lambda {} (0-255), patch {}",
            cfg.schedule.steps, cfg.schedule.lambda, cfg.patch_size
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_indices_are_distinct() {
        use OpKind::*;
        assert_eq!(permutation_index(&[Blur, Resize, Noise, Jpeg]), 0);
        assert_eq!(permutation_index(&[Jpeg, Noise, Resize, Blur]), 23);
    }

    #[test]
    fn conjugacy_catches_missing_lambda_sq() {
        assert!(check_conjugacy(Mutation::None).0);
        assert!(!check_conjugacy(Mutation::DropLambdaSq).0);
    }

    #[test]
    fn unknown_check_name() {
        assert!(run_checks(Some("nope"), Mutation::None).is_none());
        let only = run_checks(Some("defaults"), Mutation::None).unwrap();
        assert_eq!(only.len(), 1);
        assert!(only[0].passed);
    }
}
