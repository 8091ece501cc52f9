//! `eder` — experiment harness for diversity-based experience replay.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use eder_cli::commands::{self, CliError, SweepAxis};

#[derive(Parser)]
#[command(
    name = "eder",
    version,
    about = "Seeded experience-replay experiments, ablation sweeps, and determinant benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write metrics.csv
    Run {
        /// Path to the TOML experiment config
        config: PathBuf,
        /// Also write a metrics.json mirror
        #[arg(long)]
        json: bool,
    },
    /// Run a config once per value of one axis and write a summary
    Sweep {
        /// Path to the TOML experiment config
        config: PathBuf,
        /// Axis to vary
        #[arg(long)]
        axis: AxisArg,
        /// Comma-separated axis values (integers, or on/off for flags)
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Time the Cholesky determinant against the LU oracle
    BenchDet {
        /// Comma-separated matrix orders
        #[arg(long = "b", value_delimiter = ',', required = true)]
        orders: Vec<usize>,
        /// Matrices per order
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Embedding dimension of the random columns
        #[arg(long, default_value_t = 128)]
        dim: usize,
    },
    /// Check a config file and print the effective configuration
    Validate {
        /// Path to the TOML experiment config
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    B,
    M,
    #[value(name = "rejection_sampling", alias = "rejection-sampling")]
    RejectionSampling,
    Cholesky,
}

impl From<AxisArg> for SweepAxis {
    fn from(axis: AxisArg) -> Self {
        match axis {
            AxisArg::B => SweepAxis::SegmentLength,
            AxisArg::M => SweepAxis::TopM,
            AxisArg::RejectionSampling => SweepAxis::RejectionSampling,
            AxisArg::Cholesky => SweepAxis::Cholesky,
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, json } => commands::cmd_run(&config, json).map(|_| ()),
        Command::Sweep {
            config,
            axis,
            values,
        } => commands::cmd_sweep(&config, axis.into(), &values).map(|_| ()),
        Command::BenchDet {
            orders,
            trials,
            dim,
        } => commands::cmd_bench_det(&orders, trials, dim).map(|_| ()),
        Command::Validate { config } => commands::cmd_validate(&config),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code())
        }
    }
}
