use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "delaymat", version, about = "Explicit solutions of linear matrix delay equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Cont,
    Disc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Sample the fundamental matrix Z.
    Fundamental {
        #[arg(long)]
        system: PathBuf,
        /// Reads the system as continuous or discrete regardless of its file kind.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// First sample time (default: one delay before zero, minus one for discrete).
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long)]
        to: f64,
        /// Sampling step (default 1 for discrete, delay/16 for continuous).
        #[arg(long)]
        step: Option<f64>,
        /// Writes the auxiliary table Q as JSON.
        #[arg(long)]
        dump_q: Option<PathBuf>,
        /// Writes Z as JSON (piecewise polynomial or value table).
        #[arg(long)]
        dump_z: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the initial-value problem.
    Solve {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        history: PathBuf,
        /// Forcing file; zero forcing when omitted.
        #[arg(long)]
        forcing: Option<PathBuf>,
        /// Horizon T (continuous) or N (discrete).
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate the formulas even if A1 does not commute with the data.
        #[arg(long)]
        allow_noncommuting_data: bool,
        /// Commutation tolerance.
        #[arg(long, default_value_t = delaymat::solve::DEFAULT_HYPOTHESIS_TOL)]
        tol: f64,
    },
    /// Compare closed forms against the brute-force oracles.
    Verify {
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        system: Option<PathBuf>,
        #[arg(long, requires = "system")]
        history: Option<PathBuf>,
        #[arg(long, requires = "system")]
        forcing: Option<PathBuf>,
        /// Generate the systems from the seed instead of reading a file.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random systems of each kind.
        #[arg(long, default_value_t = 3)]
        count: usize,
        /// Horizon in multiples of the delay.
        #[arg(long, default_value_t = 5)]
        windows: usize,
        #[arg(long, default_value_t = delaymat::oracle::DEFAULT_SUBSTEPS)]
        substeps: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a bundled worked example against its stored expectations.
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        number: u8,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DELAYMAT_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(&cli.command) {
        Ok(commands::Status::Success) => ExitCode::SUCCESS,
        Ok(commands::Status::ToleranceFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
