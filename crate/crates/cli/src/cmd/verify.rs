use std::process::ExitCode;

use anyhow::{bail, Result};
use wildsde::verify::{check_names, run_checks, Mutation};

use crate::VerifyArgs;

pub fn run(args: &VerifyArgs) -> Result<ExitCode> {
    let mutation = match args.mutation.as_deref() {
        Some("drop-lambda-sq") => Mutation::DropLambdaSq,
        _ => Mutation::None,
    };
    let Some(results) = run_checks(args.only.as_deref(), mutation) else {
        let known: Vec<_> = check_names().collect();
        bail!("unknown check `{}`; known: {}", args.only.as_deref().unwrap_or(""), known.join(", "));
    };
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    for r in &results {
        println!(
            "{:<4} {:<20} {:>7.2}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
    }
    if failed.is_empty() {
        println!("all {} checks passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}
