//! `wildsde`: synthesize degraded datasets, run oracle restorations, check
//! invariants and compare image folders.

mod cmd;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use wildsde::config::{RestoreMode, RunConfig};

#[derive(Parser)]
#[command(name = "wildsde", version, about)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade every PNG in a folder and write LQ images, op logs and a manifest.
    Degrade(DegradeArgs),
    /// Restore LQ images with an oracle noise predictor and report PSNR/SSIM.
    RestoreOracle(RestoreArgs),
    /// Run the invariant checks and print a pass/fail table.
    Verify(VerifyArgs),
    /// PSNR/SSIM between two folders with matching file names.
    Metrics(MetricsArgs),
    /// Print the noise schedule table as CSV.
    ScheduleDump(ScheduleArgs),
}

#[derive(Args)]
pub struct DegradeArgs {
    /// Folder of HQ PNG images.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RestoreArgs {
    /// Folder of HQ PNG images (the oracle needs them).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Folder of LQ PNG images with the same file names.
    #[arg(long)]
    pub lq: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<RestoreMode>,
    /// Override the number of diffusion steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Std of the noise added to every oracle prediction.
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Run a single named check.
    #[arg(long)]
    pub only: Option<String>,
    /// Deliberately break the build for the mutation sanity test.
    #[arg(long, hide = true, value_parser = ["drop-lambda-sq"])]
    pub mutation: Option<String>,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Folder of images to score.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Reference folder.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<RestoreMode, String> {
    s.parse().map_err(|e: wildsde::Error| e.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = load_config(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .context("starting worker pool")?;
    match cli.command {
        Command::Degrade(a) => {
            cfg.validate()?;
            cmd::degrade::run(&cfg, &a)
        }
        Command::RestoreOracle(a) => {
            if let Some(mode) = a.mode {
                cfg.restore.mode = mode;
            }
            if let Some(steps) = a.steps {
                cfg.schedule.steps = steps;
            }
            if let Some(p) = a.perturb {
                cfg.restore.perturb_sigma = p;
            }
            cfg.validate()?;
            cmd::restore::run(&cfg, &a)
        }
        Command::Verify(a) => cmd::verify::run(&a),
        Command::Metrics(a) => cmd::metrics::run(&a),
        Command::ScheduleDump(a) => {
            if let Some(steps) = a.steps {
                cfg.schedule.steps = steps;
            }
            cmd::schedule::run(&cfg, &a)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
