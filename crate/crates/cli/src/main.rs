mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Format;

/// Simulation and analysis of the dispersion process in its critical window.
#[derive(Parser, Debug)]
#[command(name = "dispersion", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Master seed; replica i draws from the stream derived from (seed, i)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Cap on worker threads for replica batches
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// JSON file with settings; flags given on the command line win
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Print the effective settings as JSON and exit
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run independent replicas of the particle process
    Simulate(commands::SimulateArgs),
    /// Grid of batches over n, alpha and checkpoint deltas
    Sweep(commands::SweepArgs),
    /// Simulate the limiting diffusions
    #[command(subcommand)]
    Sde(commands::SdeCommand),
    /// Evaluate closed forms and numerical limits
    #[command(subcommand)]
    Analytic(commands::AnalyticCommand),
    /// Run a harness experiment and check it against the limit laws
    Verify(commands::VerifyArgs),
}

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit code 2.
    Usage(String),
    /// Runtime failure: exit code 1.
    Runtime(String),
    /// A verification check failed: exit code 3.
    Verification,
}

impl From<dispersion_lab::LabError> for Failure {
    fn from(e: dispersion_lab::LabError) -> Self {
        match e {
            dispersion_lab::LabError::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}
