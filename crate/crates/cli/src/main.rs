//! `fjtl`: simulate, optimize, synthesize and analyze timeline-augmented
//! opinion dynamics from the command line.
//!
//! Exit status is 0 on success, 2 for invalid input and 3 when a numerical
//! routine fails to converge. `FJTL_THREADS` sets the worker thread count.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod io;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{AnalyzeArgs, OptimizeArgs, SimulateArgs, SynthCmdArgs};
use io::{CliError, CliResult};

const THREADS_ENV: &str = "FJTL_THREADS";

#[derive(Parser, Debug)]
#[command(name = "fjtl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Polarization and disagreement with and without timeline edges.
    Simulate(SimulateArgs),
    /// Reduce polarization plus disagreement by adjusting topic weights.
    Optimize(OptimizeArgs),
    /// Write a synthetic instance to disk.
    Synth(SynthCmdArgs),
    /// Compare topic weights and opinions before and after optimization.
    Analyze(AnalyzeArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))
}

/// Writes the report to stdout; a closed pipe is not an error.
fn print<T: Serialize>(report: &T) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", io::to_json(report)) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(fjtl::Error::from(e).into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => print(&commands::simulate(&a)?)?,
        Command::Optimize(a) => print(&commands::optimize_cmd(&a)?)?,
        Command::Synth(a) => print(&commands::synth(&a)?)?,
        Command::Analyze(a) => print(&commands::analyze_cmd(&a)?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
