use super::*;
use crate::metrics::psnr;
use crate::patterns;
use crate::rng::stream;

fn scalar(v: f64) -> ImageBuffer {
    ImageBuffer::scalar(v).unwrap()
}

fn default_schedule() -> NoiseSchedule {
    NoiseSchedule::build(100, 50.0 / 255.0, 0.005, ScheduleShape::FlattenedCosine).unwrap()
}

fn pair(size: usize) -> (ImageBuffer, ImageBuffer) {
    let x0 = patterns::textured(size, size, 3, 11);
    let mu = x0.map(|v| 0.6 * v + 0.2).unwrap();
    (x0, mu)
}

#[test]
fn marginal_at_zero_is_x0() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let m = marginal_params(&s, &x0, &mu, 0).unwrap();
    assert_eq!(m.mean, x0);
    assert_eq!(m.variance, 0.0);
}

#[test]
fn marginal_without_displacement_stays_at_mu() {
    let s = default_schedule();
    let (_, mu) = pair(8);
    for t in [1, 50, 100] {
        let m = marginal_params(&s, &mu, &mu, t).unwrap();
        assert_eq!(m.mean, mu);
        let expected = s.lambda().powi(2) * (1.0 - (-2.0 * s.cum_theta(t)).exp());
        assert!((m.variance - expected).abs() < 1e-15);
    }
}

#[test]
fn marginal_scalar_values() {
    let s = NoiseSchedule::from_step_thetas(vec![0.5], 50.0).unwrap();
    assert!((s.mean_coeff(1) - 0.606_530_659_712_633_4).abs() < 1e-15);
    let m = marginal_params(&s, &scalar(200.0), &scalar(100.0), 1).unwrap();
    assert!((m.variance - 1_580.301_397_071_394_2).abs() < 1e-9);
    assert!((m.mean[0] - 160.653_065_971_263_34).abs() < 1e-12);
}

#[test]
fn marginal_errors() {
    let s = default_schedule();
    let (x0, _) = pair(8);
    let other = ImageBuffer::zeros(4, 8, 3).unwrap();
    assert!(matches!(
        marginal_params(&s, &x0, &other, 1),
        Err(Error::ShapeMismatch { .. })
    ));
    assert!(matches!(
        marginal_params(&s, &x0, &x0, 101),
        Err(Error::TimeOutOfRange { t: 101, max: 100 })
    ));
}

#[test]
fn variance_is_nondecreasing_and_below_lambda_sq() {
    let s = default_schedule();
    let lam2 = s.lambda().powi(2);
    for t in 1..=100 {
        assert!(s.variance(t) >= s.variance(t - 1));
        assert!(s.variance(t) < lam2);
    }
}

#[test]
fn forward_sample_at_zero_ignores_rng() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let a = forward_sample(&s, &x0, &mu, 0, &mut stream(1, 0)).unwrap();
    let b = forward_sample(&s, &x0, &mu, 0, &mut stream(2, 0)).unwrap();
    assert_eq!(a, x0);
    assert_eq!(b, x0);
}

#[test]
fn forward_sample_is_deterministic() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let a = forward_sample(&s, &x0, &mu, 40, &mut stream(9, 0)).unwrap();
    let b = forward_sample(&s, &x0, &mu, 40, &mut stream(9, 0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn forward_sample_mean_matches_marginal() {
    let s = NoiseSchedule::build(100, 50.0, 0.005, ScheduleShape::Uniform).unwrap();
    let n = 100_000;
    let x0 = ImageBuffer::new(1, n, 1, vec![200.0; n]).unwrap();
    let mu = ImageBuffer::new(1, n, 1, vec![100.0; n]).unwrap();
    let t = 30;
    let xt = forward_sample(&s, &x0, &mu, t, &mut stream(5, 0)).unwrap();
    let mean = xt.data().iter().sum::<f64>() / n as f64;
    let m = 100.0 + 100.0 * s.mean_coeff(t);
    let se = (s.variance(t) / n as f64).sqrt();
    assert!((mean - m).abs() < 3.0 * se, "mean {mean} vs {m} (se {se})");
}

#[test]
fn score_vanishes_at_mean() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let m = marginal_params(&s, &x0, &mu, 20).unwrap();
    let score = analytic_score(&s, &m.mean, &x0, &mu, 20).unwrap();
    assert!(score.data().iter().all(|v| *v == 0.0));
}

#[test]
fn score_is_scaled_noise() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let eps = draw_noise(&x0, &mut stream(3, 0));
    for t in [1, 7, 60, 100] {
        let xt = forward_sample_with_noise(&s, &x0, &mu, t, &eps).unwrap();
        let score = analytic_score(&s, &xt, &x0, &mu, t).unwrap();
        let std = s.variance(t).sqrt();
        for (sc, e) in score.data().iter().zip(eps.data()) {
            assert!((sc + e / std).abs() < 1e-9);
        }
    }
}

#[test]
fn score_scalar_value() {
    let s = NoiseSchedule::from_step_thetas(vec![0.5], 50.0).unwrap();
    let score =
        analytic_score(&s, &scalar(150.0), &scalar(200.0), &scalar(100.0), 1).unwrap();
    assert!((score[0] - 0.006_741_160_889_312_346).abs() < 1e-15);
}

#[test]
fn score_at_zero_is_singular() {
    let s = default_schedule();
    let x = scalar(0.5);
    assert_eq!(
        analytic_score(&s, &x, &x, &x, 0),
        Err(Error::SingularTime(0))
    );
}

#[test]
fn euler_without_noise_or_displacement_stays_put() {
    let s = NoiseSchedule::build(20, 1e-12, 0.005, ScheduleShape::Uniform).unwrap();
    let (_, mu) = pair(4);
    let traj = euler_forward_simulate(&s, &mu, &mu, 10, &mut stream(0, 0)).unwrap();
    assert_eq!(traj.len(), 21);
    for state in &traj {
        for (a, b) in state.data().iter().zip(mu.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn euler_rejects_zero_substeps() {
    let s = default_schedule();
    let x = scalar(0.5);
    assert!(euler_forward_simulate(&s, &x, &x, 0, &mut stream(0, 0)).is_err());
}

#[test]
fn reverse_step_zero_score_arithmetic() {
    // Backward in time the drift pushes away from mu: x - theta (mu - x).
    let s = NoiseSchedule::from_step_thetas(vec![0.1], 1.0).unwrap();
    let x = reverse_sde_step(
        &s,
        &scalar(1.0),
        &scalar(0.0),
        &scalar(0.0),
        1,
        &mut stream(0, 0),
        true,
    )
    .unwrap();
    assert!((x[0] - 1.1).abs() < 1e-15);
}

#[test]
fn reverse_step_fixed_point() {
    let s = default_schedule();
    let (_, mu) = pair(4);
    let zero = ImageBuffer::zeros(4, 4, 3).unwrap();
    let x = reverse_sde_step(&s, &mu, &mu, &zero, 50, &mut stream(0, 0), true).unwrap();
    assert_eq!(x, mu);
    assert!(reverse_sde_step(&s, &mu, &mu, &zero, 0, &mut stream(0, 0), true).is_err());
    assert!(reverse_sde_step(&s, &mu, &mu, &zero, 101, &mut stream(0, 0), true).is_err());
}

#[test]
fn reverse_sde_run_with_analytic_score_recovers_x0() {
    let s = default_schedule();
    let x0 = patterns::textured(64, 64, 3, 4);
    let mu = x0.map(|v| 0.5 * v + 0.25).unwrap();
    let oracle = oracle_noise_predictor(&s, &x0);
    let out = reverse_sde_loop(
        &s,
        &mu,
        &oracle,
        &mut stream(21, 0),
        Init::FromLqNoise,
        ReverseNoise::AllButFinal,
        false,
    )
    .unwrap();
    let p = psnr(&out.x0, &x0, 1.0).unwrap();
    assert!(p > 25.0, "reverse SDE PSNR {p}");
}

#[test]
fn optimal_reverse_boundaries() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    assert_eq!(optimal_reverse_step(&s, &mu, &mu, &mu, 37).unwrap(), mu);
    let xt = forward_sample(&s, &x0, &mu, 1, &mut stream(2, 0)).unwrap();
    let prev = optimal_reverse_step(&s, &xt, &x0, &mu, 1).unwrap();
    for (a, b) in prev.data().iter().zip(x0.data()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn optimal_reverse_scalar_value() {
    let s = NoiseSchedule::from_step_thetas(vec![0.4, 0.1], 1.0).unwrap();
    let (a, b) = s.posterior_coeffs(2);
    assert!((a - 0.788_247_987_407_255_8).abs() < 1e-15);
    assert!((b - 0.192_223_474_216_360_85).abs() < 1e-15);
    let x = optimal_reverse_step(&s, &scalar(0.7), &scalar(1.0), &scalar(0.0), 2).unwrap();
    assert!((x[0] - 0.743_997_065_401_44).abs() < 1e-14);
}

#[test]
fn posterior_at_first_step_is_x0() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let xt = forward_sample(&s, &x0, &mu, 1, &mut stream(8, 0)).unwrap();
    let p = posterior_params(&s, &xt, &x0, &mu, 1).unwrap();
    assert_eq!(p.variance, 0.0);
    assert_eq!(p.mean, optimal_reverse_step(&s, &xt, &x0, &mu, 1).unwrap());
    for (a, b) in p.mean.data().iter().zip(x0.data()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn posterior_variance_scalar_value() {
    let s = NoiseSchedule::from_step_thetas(vec![0.4, 0.1], 2.0).unwrap();
    assert!((s.posterior_variance(2) - 0.631_649_912_866_142_1).abs() < 1e-14);
}

/// Posterior of `x_{t-1}` from the transition and prior Gaussians, in
/// precision form.
fn conjugate_posterior(prev: f64, step: f64, lambda: f64, x0: f64, xt: f64, mu: f64) -> (f64, f64) {
    let lam2 = lambda * lambda;
    let a = (-step).exp();
    let trans_var = lam2 * (1.0 - (-2.0 * step).exp());
    let prior_mean = (x0 - mu) * (-prev).exp();
    let prior_var = lam2 * (1.0 - (-2.0 * prev).exp());
    let precision = 1.0 / prior_var + a * a / trans_var;
    let var = 1.0 / precision;
    let mean = var * (prior_mean / prior_var + a * (xt - mu) / trans_var) + mu;
    (mean, var)
}

#[test]
fn posterior_variance_matches_conjugacy_example() {
    let (_, var) = conjugate_posterior(0.4, 0.1, 2.0, 0.3, 0.1, 0.0);
    let s = NoiseSchedule::from_step_thetas(vec![0.4, 0.1], 2.0).unwrap();
    assert!((s.posterior_variance(2) - var).abs() < 1e-12);
}

#[test]
fn estimate_x0_inverts_forward_sample() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let oracle = oracle_noise_predictor(&s, &x0);
    let eps = draw_noise(&x0, &mut stream(44, 0));
    for t in [1, 2, 33, 99, 100] {
        let xt = forward_sample_with_noise(&s, &x0, &mu, t, &eps).unwrap();
        let est = estimate_x0(&s, &xt, &mu, t, &oracle, false).unwrap();
        for (a, b) in est.data().iter().zip(x0.data()) {
            assert!((a - b).abs() < 1e-10, "t={t}: {a} vs {b}");
        }
    }
}

#[test]
fn estimate_x0_zero_noise_at_mu() {
    struct Zero;
    impl NoisePredictor for Zero {
        fn predict(&self, x: &ImageBuffer, _: &ImageBuffer, _: usize) -> Result<ImageBuffer> {
            x.map(|_| 0.0)
        }
    }
    let s = default_schedule();
    let (_, mu) = pair(8);
    assert_eq!(estimate_x0(&s, &mu, &mu, 70, &Zero, false).unwrap(), mu);
    assert_eq!(estimate_x0(&s, &mu, &mu, 0, &Zero, false), Err(Error::SingularTime(0)));
}

#[test]
fn estimate_x0_error_amplification() {
    let s = NoiseSchedule::from_step_thetas(vec![5.0], 1.0).unwrap();
    let x = scalar(0.3);
    let mu = scalar(0.1);
    let exact = estimate_x0_from_noise(&s, &x, &mu, 1, &scalar(0.2), false).unwrap();
    let off = estimate_x0_from_noise(&s, &x, &mu, 1, &scalar(0.21), false).unwrap();
    let factor = (off[0] - exact[0]).abs() / 0.01;
    assert!((factor - 148.409_790_090_838_4).abs() < 1e-8, "{factor}");
}

#[test]
fn estimate_x0_rejects_bad_predictor_output() {
    struct Wrong;
    impl NoisePredictor for Wrong {
        fn predict(&self, _: &ImageBuffer, _: &ImageBuffer, _: usize) -> Result<ImageBuffer> {
            ImageBuffer::zeros(1, 1, 1)
        }
    }
    let s = default_schedule();
    let (_, mu) = pair(4);
    assert!(matches!(
        estimate_x0(&s, &mu, &mu, 3, &Wrong, false),
        Err(Error::Predictor(_))
    ));
}

#[test]
fn oracle_predictor_is_zero_at_mean() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let oracle = oracle_noise_predictor(&s, &x0);
    let m = marginal_params(&s, &x0, &mu, 12).unwrap();
    let eps = oracle.predict(&m.mean, &mu, 12).unwrap();
    assert!(eps.data().iter().all(|v| *v == 0.0));
    assert!(oracle.predict(&m.mean, &mu, 0).is_err());
}

#[test]
fn posterior_loop_with_oracle_is_exact() {
    let s = default_schedule();
    let (x0, mu) = pair(32);
    let oracle = oracle_noise_predictor(&s, &x0);
    for seed in 0..5 {
        let out = posterior_sample_loop(
            &s,
            &mu,
            &oracle,
            &mut stream(seed, 0),
            Init::FromLqNoise,
            SampleOptions {
                clamp_x0: false,
                keep_trajectory: true,
            },
        )
        .unwrap();
        assert_eq!(out.trajectory.as_ref().unwrap().len(), 101);
        for (a, b) in out.x0.data().iter().zip(x0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn posterior_loop_single_step_is_estimate() {
    let s = NoiseSchedule::build(1, 0.2, 0.1, ScheduleShape::Uniform).unwrap();
    let (x0, mu) = pair(8);
    let xt = forward_sample(&s, &x0, &mu, 1, &mut stream(1, 0)).unwrap();
    let oracle = PerturbedOracle::new(oracle_noise_predictor(&s, &x0), 0.3, 5);
    let out = posterior_sample_loop(
        &s,
        &mu,
        &oracle,
        &mut stream(2, 0),
        Init::Given(xt.clone()),
        SampleOptions::default(),
    )
    .unwrap();
    let est = estimate_x0(&s, &xt, &mu, 1, &oracle, true).unwrap();
    assert_eq!(out.x0, est);
}

#[test]
fn posterior_loop_improves_under_perturbation() {
    let s = default_schedule();
    let x0 = patterns::textured(64, 64, 3, 2);
    let mu = x0.map(|v| 0.5 * v + 0.25).unwrap();
    let mut rng = stream(3, 0);
    let xt = forward_sample(&s, &x0, &mu, 100, &mut rng).unwrap();
    let noisy = PerturbedOracle::new(oracle_noise_predictor(&s, &x0), 0.1, 77);
    let out = posterior_sample_loop(
        &s,
        &mu,
        &noisy,
        &mut rng,
        Init::Given(xt.clone()),
        SampleOptions::default(),
    )
    .unwrap();
    let before = psnr(&xt, &x0, 1.0).unwrap();
    let after = psnr(&out.x0, &x0, 1.0).unwrap();
    assert!(after > before, "{after} <= {before}");
}

#[test]
fn sampling_is_deterministic() {
    let s = default_schedule();
    let (x0, mu) = pair(8);
    let noisy = PerturbedOracle::new(oracle_noise_predictor(&s, &x0), 0.1, 1);
    let run = || {
        posterior_sample_loop(
            &s,
            &mu,
            &noisy,
            &mut stream(6, 0),
            Init::FromLqNoise,
            SampleOptions::default(),
        )
        .unwrap()
        .x0
    };
    assert_eq!(run(), run());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn posterior_matches_conjugacy(
            prev in 0.01f64..4.0,
            step in 0.001f64..0.5,
            lambda in 0.05f64..2.0,
            x0 in -1.0f64..2.0,
            xt in -1.0f64..2.0,
            mu in -1.0f64..2.0,
        ) {
            let s = NoiseSchedule::from_step_thetas(vec![prev, step], lambda).unwrap();
            let p = posterior_params(&s, &scalar(xt), &scalar(x0), &scalar(mu), 2).unwrap();
            let (mean, var) = conjugate_posterior(prev, step, lambda, x0, xt, mu);
            prop_assert!((p.mean[0] - mean).abs() < 1e-10);
            prop_assert!((p.variance - var).abs() < 1e-10);
        }

        #[test]
        fn schedule_hits_terminal_decay(
            steps in 1usize..300,
            decay in 0.001f64..0.9,
            cosine in any::<bool>(),
        ) {
            let shape = if cosine { ScheduleShape::FlattenedCosine } else { ScheduleShape::Uniform };
            let s = NoiseSchedule::build(steps, 0.2, decay, shape).unwrap();
            prop_assert!((s.mean_coeff(steps) - decay).abs() < 1e-12);
            for t in 1..=steps {
                prop_assert!(s.cum_theta(t) > s.cum_theta(t - 1));
            }
        }
    }
}
