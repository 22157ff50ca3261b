//! `zic`: command-line driver for the experiments in `zic-core`.

mod commands;
mod parse;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use serde_json::json;

use commands::{Command, Invalid};
use report::Format;

#[derive(Debug, Parser)]
#[command(name = "zic", version, about = "Counterexamples, stability maps and Han-Kobayashi tables for the Gaussian Z-interference channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Report file; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

const VALIDATION: u8 = 2;
const MISMATCH: u8 = 3;

fn configure_threads() -> Result<(), Invalid> {
    let Ok(v) = std::env::var("ZIC_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Invalid(format!("ZIC_THREADS must be a positive integer, got {v:?}")))?;
    // Fails only if a pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use zic_core::Error as E;
    if err.downcast_ref::<Invalid>().is_some() {
        return VALIDATION;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::InvalidParameter(_)
            | E::NoGaussianMax { .. }
            | E::NotStationary { .. }
            | E::DimensionMismatch(..)
            | E::NonConvexInput
            | E::PowerViolation { .. }
            | E::RecipeRejected(_),
        ) => VALIDATION,
        Some(_) => MISMATCH,
        None => 1,
    }
}

fn emit(cli: &Cli, report: &report::Report) -> Result<()> {
    match &cli.output {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(f);
            report.write(cli.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.write(cli.format, &mut w)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(VALIDATION);
    }
    let config = json!({
        "subcommand": cli.command.name(),
        "seed": cli.seed,
        "format": cli.format,
        "output": cli.output.as_ref().map(|p| p.display().to_string()),
    });
    let report = match cli.command.run(config, cli.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Err(e) = emit(&cli, &report) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} = {} (expected {:?}, tolerance {:?})", c.name, c.value, c.expected, c.tolerance);
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(MISMATCH)
    }
}
