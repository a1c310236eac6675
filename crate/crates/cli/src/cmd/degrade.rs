use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use wildsde::annotate::{build_record, write_manifest, DatasetRecord};
use wildsde::config::RunConfig;
use wildsde::degrade::apply_pipeline;
use wildsde::rng::image_stream;

use crate::io::{center_crop, file_name, list_pngs, read_png, write_png};
use crate::DegradeArgs;

pub const MANIFEST: &str = "manifest.jsonl";

pub fn run(cfg: &RunConfig, args: &DegradeArgs) -> Result<ExitCode> {
    let inputs = list_pngs(&args.input)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    if cfg.crop_to_patch {
        std::fs::create_dir_all(args.out.join("hq"))?;
    }
    if inputs.is_empty() {
        warn!("no PNG images in {}", args.input.display());
    }

    let records: Vec<Option<DatasetRecord>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, path)| match degrade_one(cfg, path, i as u64, &args.out) {
            Ok(r) => Some(r),
            Err(e) => {
                warn!("skipping {}: {e:#}", path.display());
                None
            }
        })
        .collect();
    let done: Vec<&DatasetRecord> = records.iter().flatten().collect();

    let manifest = args.out.join(MANIFEST);
    let mut out = BufWriter::new(File::create(&manifest)?);
    write_manifest(&mut out, done.iter().copied())?;
    info!("degraded {}/{} images into {}", done.len(), inputs.len(), args.out.display());

    if !inputs.is_empty() && done.is_empty() {
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn degrade_one(cfg: &RunConfig, path: &Path, index: u64, out: &Path) -> Result<DatasetRecord> {
    let name = file_name(path);
    let mut hq = read_png(path)?;
    let hq_path = if cfg.crop_to_patch {
        hq = center_crop(&hq, cfg.patch_size);
        let rel = format!("hq/{name}");
        write_png(&out.join(&rel), &hq)?;
        rel
    } else {
        path.to_string_lossy().into_owned()
    };
    let (lq, log) = apply_pipeline(&hq, &cfg.pipeline, &mut image_stream(cfg.seed, index))?;
    write_png(&out.join(&name), &lq)?;
    let stem = Path::new(&name).file_stem().expect("named file").to_string_lossy();
    std::fs::write(out.join(format!("{stem}.oplog.json")), log.to_json())?;
    Ok(build_record(&hq_path, &name, log)?)
}
