use criterion::{black_box, criterion_group, criterion_main, Criterion};
use wildsde::config::RunConfig;
use wildsde::degrade::{apply_pipeline, convolve, jpeg_roundtrip, make_kernel, wiener_deconvolve, KernelSpec, PipelineConfig};
use wildsde::metrics::{ssim, SsimParams};
use wildsde::patterns;
use wildsde::rng::stream;
use wildsde::sde::{oracle_noise_predictor, posterior_sample_loop, Init, SampleOptions};

fn posterior_loop(c: &mut Criterion) {
    let sched = RunConfig::default().schedule.build().unwrap();
    let x0 = patterns::textured(64, 64, 3, 1);
    let mu = patterns::blobs(64, 64, 3);
    let oracle = oracle_noise_predictor(&sched, &x0);
    c.bench_function("posterior_loop_64x64_T100", |b| {
        b.iter(|| {
            posterior_sample_loop(&sched, &mu, &oracle, &mut stream(0, 0), Init::FromLqNoise, SampleOptions::default())
                .unwrap()
        })
    });
}

fn pipeline(c: &mut Criterion) {
    let img = patterns::textured(256, 256, 3, 2);
    let cfg = PipelineConfig::default();
    let mut seed = 0;
    c.bench_function("pipeline_256x256", |b| {
        b.iter(|| {
            seed += 1;
            apply_pipeline(&img, &cfg, &mut stream(seed, 0)).unwrap()
        })
    });
}

fn codecs_and_filters(c: &mut Criterion) {
    let img = patterns::textured(256, 256, 3, 3);
    let k = make_kernel(&KernelSpec::Gaussian { sigma: 2.0, size: None }).unwrap();
    let blurred = convolve(&img, &k).unwrap();
    c.bench_function("jpeg_q50_256x256", |b| b.iter(|| jpeg_roundtrip(black_box(&img), 50, true).unwrap()));
    c.bench_function("wiener_256x256", |b| b.iter(|| wiener_deconvolve(black_box(&blurred), &k, 1e-3).unwrap()));
    c.bench_function("ssim_256x256", |b| b.iter(|| ssim(black_box(&img), &blurred, &SsimParams::default()).unwrap()));
}

criterion_group!(benches, posterior_loop, pipeline, codecs_and_filters);
criterion_main!(benches);
