use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use wildsde::config::{RestoreMode, RunConfig};
use wildsde::metrics::{psnr, psnr_for_table, ssim, SsimParams};
use wildsde::rng::image_stream;
use wildsde::sde::{
    oracle_noise_predictor, posterior_sample_loop, reverse_sde_loop, Init, NoisePredictor,
    NoiseSchedule, PerturbedOracle, ReverseNoise, SampleOptions, SampleOutput,
};
use wildsde::ImageBuffer;

use crate::io::{file_name, fmt_db, list_pngs, read_png, write_png};
use crate::RestoreArgs;

pub const REPORT: &str = "restore.csv";

struct Row {
    name: String,
    psnr_before: f64,
    psnr_after: f64,
    ssim_before: f64,
    ssim_after: f64,
}

pub fn run(cfg: &RunConfig, args: &RestoreArgs) -> Result<ExitCode> {
    let sched = cfg.schedule.build()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let hq_files = list_pngs(&args.input)?;
    let pairs: Vec<_> = hq_files
        .iter()
        .enumerate()
        .filter_map(|(i, hq)| {
            let lq = args.lq.join(hq.file_name()?);
            if lq.is_file() {
                Some((i as u64, hq.clone(), lq))
            } else {
                warn!("no LQ image for {}", file_name(hq));
                None
            }
        })
        .collect();
    if pairs.is_empty() {
        bail!("no HQ/LQ pairs between {} and {}", args.input.display(), args.lq.display());
    }

    let rows: Vec<Option<Row>> = pairs
        .par_iter()
        .map(|(i, hq, lq)| match restore_one(cfg, &sched, hq, lq, *i, &args.out) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("skipping {}: {e:#}", file_name(hq));
                None
            }
        })
        .collect();
    let rows: Vec<Row> = rows.into_iter().flatten().collect();

    let mut csv = csv::Writer::from_path(args.out.join(REPORT))?;
    csv.write_record(["name", "psnr_before", "psnr_after", "ssim_before", "ssim_after"])?;
    println!("{:<24} {:>10} {:>10} {:>8} {:>8}", "name", "psnr_in", "psnr_out", "ssim_in", "ssim_out");
    for r in &rows {
        csv.write_record([
            r.name.clone(),
            fmt_db(r.psnr_before),
            fmt_db(r.psnr_after),
            format!("{:.6}", r.ssim_before),
            format!("{:.6}", r.ssim_after),
        ])?;
        println!(
            "{:<24} {:>10.2} {:>10.2} {:>8.4} {:>8.4}",
            r.name,
            psnr_for_table(r.psnr_before),
            psnr_for_table(r.psnr_after),
            r.ssim_before,
            r.ssim_after
        );
    }
    csv.flush()?;
    info!("restored {}/{} pairs", rows.len(), pairs.len());
    Ok(if rows.is_empty() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn restore_one(
    cfg: &RunConfig,
    sched: &NoiseSchedule,
    hq_path: &Path,
    lq_path: &Path,
    index: u64,
    out: &Path,
) -> Result<Row> {
    let hq = read_png(hq_path)?;
    let lq = read_png(lq_path)?;
    hq.check_same_shape(&lq)?;
    let mut rng = image_stream(cfg.seed, index);
    let oracle = oracle_noise_predictor(sched, &hq);
    let restored = if cfg.restore.perturb_sigma > 0.0 {
        let pred = PerturbedOracle::new(oracle, cfg.restore.perturb_sigma, rng.random());
        sample(cfg, sched, &lq, &pred, &mut rng)?
    } else {
        sample(cfg, sched, &lq, &oracle, &mut rng)?
    }
    .x0;
    write_png(&out.join(file_name(hq_path)), &restored)?;
    let params = SsimParams::default();
    Ok(Row {
        name: file_name(hq_path),
        psnr_before: psnr(&lq, &hq, 1.0)?,
        psnr_after: psnr(&restored, &hq, 1.0)?,
        ssim_before: ssim(&lq, &hq, &params)?,
        ssim_after: ssim(&restored, &hq, &params)?,
    })
}

fn sample(
    cfg: &RunConfig,
    sched: &NoiseSchedule,
    lq: &ImageBuffer,
    pred: &impl NoisePredictor,
    rng: &mut impl Rng,
) -> wildsde::Result<SampleOutput> {
    match cfg.restore.mode {
        RestoreMode::Posterior => posterior_sample_loop(
            sched,
            lq,
            pred,
            rng,
            Init::FromLqNoise,
            SampleOptions { clamp_x0: cfg.restore.clamp_x0, keep_trajectory: false },
        ),
        RestoreMode::ReverseSde => {
            reverse_sde_loop(sched, lq, pred, rng, Init::FromLqNoise, ReverseNoise::default(), false)
        }
    }
}
