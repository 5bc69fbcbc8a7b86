//! `macrodiv`: approximate SINR laws, SER curves, scheduling metrics and
//! Monte Carlo checks for macrodiversity MMSE and ZF receivers.
//!
//! Users are numbered from 1 on the command line and from 0 internally.
//! Exit status: 0 success, 2 configuration error, 3 numerical degeneracy.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use macrodiv_core::{ModulationSpec, Receiver};

use crate::table::Format;

#[derive(Debug, Parser)]
#[command(name = "macrodiv", version, about = "Macrodiversity MMSE/ZF receiver analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Approximate PDF/CDF of one user's output SINR, optionally against Monte Carlo
    Analyze(Opts),
    /// SER against transmit SNR: mixture, high-SNR asymptote, optional Monte Carlo
    Ser(Opts),
    /// Per-user high-SNR constants (zf_k0, diversity, array gains)
    Metric(Opts),
    /// Monte Carlo only: mean SINR and semi-analytic SER with standard error
    Simulate(Opts),
    /// Generate a drop from a scenario file and write its power profile
    Drop(Opts),
    /// Every user's SER under both receivers across an SNR sweep
    Compare(Opts),
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// macrodiv-profile-v1 file
    #[arg(long, group = "source")]
    pub profile: Option<PathBuf>,
    /// Built-in profile: P_M, P_P or P_D4
    #[arg(long, group = "source")]
    pub builtin: Option<String>,
    /// macrodiv-scenario-v1 file; a drop is generated with --seed
    #[arg(long, group = "source")]
    pub drop_spec: Option<PathBuf>,
    /// Scale each column of the profile to unit sum
    #[arg(long)]
    pub normalize: bool,
    /// User index, starting at 1
    #[arg(long, default_value_t = 1)]
    pub user: usize,
    #[arg(long, default_value = "mmse")]
    pub receiver: Receiver,
    /// Noise variance in dB (sigma^2 = 10^(x/10))
    #[arg(long, allow_hyphen_values = true, conflicts_with = "snr_db")]
    pub noise_db: Option<f64>,
    /// Transmit SNR 1/sigma^2 in dB: a single value or start:step:stop
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[arg(long = "mod", default_value = "qpsk")]
    pub modulation: ModulationSpec,
    /// Monte Carlo draws (0 disables Monte Carlo where it is optional)
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write output here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(macrodiv_core::Error),
}

impl From<macrodiv_core::Error> for CliError {
    fn from(e: macrodiv_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(o) => commands::analyze(o),
        Command::Ser(o) => commands::ser(o),
        Command::Metric(o) => commands::metric(o),
        Command::Simulate(o) => commands::simulate(o),
        Command::Drop(o) => commands::drop(o),
        Command::Compare(o) => commands::compare(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("macrodiv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
