//! `swd`: command-line front end for the smoothed Wasserstein toolkit.
//!
//! Exit codes: 0 on success, 2 on bad input or configuration, 1 when a
//! solver or other internal step fails.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swd_core::smooth::SmoothingMethod;
use swd_core::SwdError;

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl From<SwdError> for CliError {
    fn from(e: SwdError) -> Self {
        match e {
            SwdError::Solver(_) => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "swd",
    version,
    about = "Gaussian-smoothed 1-Wasserstein distances, tests and estimators"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Smoothed distance between two point files.
    Dist(DistArgs),
    /// Two-sample test of equal laws.
    Test(TestArgs),
    /// Bootstrap distribution of the scaled statistic.
    Bootstrap(BootstrapArgs),
    /// Minimum smooth Wasserstein estimation (fit or rate experiment).
    Mde(ExperimentArgs),
    /// Convergence-rate experiments.
    Rates(ExperimentArgs),
    /// Tail frequencies of the empirical distance.
    Concentration(ExperimentArgs),
    /// Level and power of the two-sample test by simulation.
    Power(ExperimentArgs),
}

#[derive(Args, Debug)]
pub struct DistArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: f64,
    #[arg(long, default_value = "mc-exact")]
    pub method: SmoothingMethod,
    /// Noise replicas per point.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 8)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the same noise draws on both sides.
    #[arg(long)]
    pub shared_noise: bool,
    /// Support size of the mc-shared estimator.
    #[arg(long)]
    pub support_size: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Bootstrap replicates.
    #[arg(long = "bootstrap", default_value_t = 1000)]
    pub b: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "mc-exact")]
    pub method: SmoothingMethod,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Use the same noise draws on both sides.
    #[arg(long)]
    pub shared_noise: bool,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    /// One-sample bootstrap of this file.
    #[arg(long, conflicts_with_all = ["x", "y"], required_unless_present = "x")]
    pub data: Option<PathBuf>,
    /// Pooled two-sample bootstrap of `--x` and `--y`.
    #[arg(long, requires = "y")]
    pub x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    pub y: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sigma: f64,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "mc-exact")]
    pub method: SmoothingMethod,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long)]
    pub shared_noise: bool,
    /// Quantile levels recorded in the sidecar.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95,0.99")]
    pub levels: Vec<f64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// File stem of the outputs.
    #[arg(long, default_value = "bootstrap")]
    pub name: String,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// TOML config, or a JSON sidecar of an earlier run to replay.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Dist(a) => commands::with_pool(threads, None, || commands::dist(&a)),
        Command::Test(a) => commands::with_pool(threads, None, || commands::test(&a)),
        Command::Bootstrap(a) => commands::with_pool(threads, None, || commands::bootstrap(&a)),
        Command::Mde(a) => commands::mde(&a, threads),
        Command::Rates(a) => commands::rates(&a, threads),
        Command::Concentration(a) => commands::concentration(&a, threads),
        Command::Power(a) => commands::power(&a, threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_failures_are_internal_and_the_rest_are_user_errors() {
        assert!(matches!(
            CliError::from(SwdError::Solver("stalled".into())),
            CliError::Internal(_)
        ));
        assert!(matches!(
            CliError::from(SwdError::InvalidInput("bad".into())),
            CliError::User(_)
        ));
        assert!(matches!(
            CliError::from(SwdError::DimensionMismatch {
                expected: 2,
                found: 3
            }),
            CliError::User(_)
        ));
    }
}
