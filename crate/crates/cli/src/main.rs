//! `amper`: sampling-error sweeps, latency estimates, DQN training runs and
//! sampler micro-benchmarks.

mod bench;
mod kl;
mod latency;
mod lists;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Environment variable naming the directory relative output paths go to.
pub const OUT_DIR_ENV: &str = "AMPER_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "amper",
    version,
    about = "Prioritized replay sampling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// KL divergence of each sampler against PER over a parameter grid.
    KlSweep(kl::Args),
    /// Analytical accelerator latency per batch.
    Latency(latency::Args),
    /// Train a DQN agent on cart-pole.
    Train(train::Args),
    /// Wall time per batch for every sampler.
    SampleBench(bench::Args),
}

/// Failure kinds, mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `path` under `$AMPER_OUT_DIR` when it is relative and the variable is set.
pub fn resolve_out(path: &PathBuf) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::KlSweep(a) => kl::run(a),
        Command::Latency(a) => latency::run(a),
        Command::Train(a) => train::run(a),
        Command::SampleBench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
