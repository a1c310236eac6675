use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Result};
use log::warn;
use rayon::prelude::*;
use wildsde::metrics::{psnr, ssim, SsimParams};

use crate::io::{file_name, fmt_db, list_pngs, read_png};
use crate::MetricsArgs;

pub fn run(args: &MetricsArgs) -> Result<ExitCode> {
    let pairs: Vec<_> = list_pngs(&args.input)?
        .into_iter()
        .filter_map(|p| {
            let r = args.reference.join(p.file_name()?);
            r.is_file().then_some((p, r))
        })
        .collect();
    if pairs.is_empty() {
        bail!("no matching file names between {} and {}", args.input.display(), args.reference.display());
    }
    let params = SsimParams::default();
    let scores: Vec<Option<(String, f64, f64)>> = pairs
        .par_iter()
        .map(|(a, b)| {
            let score = || -> Result<(f64, f64)> {
                let (x, y) = (read_png(a)?, read_png(b)?);
                Ok((psnr(&x, &y, 1.0)?, ssim(&x, &y, &params)?))
            };
            match score() {
                Ok((p, s)) => Some((file_name(a), p, s)),
                Err(e) => {
                    warn!("skipping {}: {e:#}", file_name(a));
                    None
                }
            }
        })
        .collect();
    let scores: Vec<_> = scores.into_iter().flatten().collect();
    if scores.is_empty() {
        bail!("no pair could be scored");
    }

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    csv.write_record(["name", "psnr", "ssim"])?;
    for (name, p, s) in &scores {
        csv.write_record([name.clone(), fmt_db(*p), format!("{s:.6}")])?;
    }
    csv.flush()?;

    let n = scores.len() as f64;
    let mean_psnr = scores.iter().map(|s| s.1).sum::<f64>() / n;
    let mean_ssim = scores.iter().map(|s| s.2).sum::<f64>() / n;
    let summary = format!("pairs {}  mean psnr {}  mean ssim {mean_ssim:.6}", scores.len(), fmt_db(mean_psnr));
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(ExitCode::SUCCESS)
}
