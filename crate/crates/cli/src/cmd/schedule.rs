use std::io::Write;
use std::process::ExitCode;

use anyhow::Result;
use wildsde::config::RunConfig;

use crate::ScheduleArgs;

pub fn run(cfg: &RunConfig, args: &ScheduleArgs) -> Result<ExitCode> {
    let sched = cfg.schedule.build()?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    sched.write_csv(sink)?;
    Ok(ExitCode::SUCCESS)
}
