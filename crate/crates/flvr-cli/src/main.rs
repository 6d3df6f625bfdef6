//! `flvr` — reproduce the activity-time bond-hedging experiments from the
//! command line.
//!
//! Subcommands: `ingest`, `fit`, `hedge`, `panel`, `test`, `simulate`.
//! Exit codes: 0 success, 1 data error, 2 configuration error, 3 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod manifest;

use config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Config,
    Numerics,
}

impl ErrorKind {
    fn exit_code(self) -> ExitCode {
        match self {
            ErrorKind::Data => ExitCode::from(1),
            ErrorKind::Config => ExitCode::from(2),
            ErrorKind::Numerics => ExitCode::from(3),
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn data(message: String) -> Self {
        Self {
            kind: ErrorKind::Data,
            message,
        }
    }

    pub fn config(message: String) -> Self {
        Self {
            kind: ErrorKind::Config,
            message,
        }
    }

    pub fn numerics(message: String) -> Self {
        Self {
            kind: ErrorKind::Numerics,
            message,
        }
    }
}

fn classify(error: &flvr::Error) -> ErrorKind {
    use flvr::Error::*;
    match error {
        Io { .. }
        | Csv { .. }
        | Parse { .. }
        | InvalidSeries(_)
        | DuplicateDate(_)
        | EmptyIntersection
        | RateOutOfRange { .. }
        | EmptyPanel => ErrorKind::Data,
        InvalidParameter(_) | InvalidWindow(_) | InvalidContract(_) => ErrorKind::Config,
        NonpositiveFactor { .. }
        | DegenerateTimeAxis
        | DegenerateSample(_)
        | HedgeFailed { .. } => ErrorKind::Numerics,
        ContractFailed { source, .. } => classify(source),
    }
}

impl From<flvr::Error> for CliError {
    fn from(error: flvr::Error) -> Self {
        Self {
            kind: classify(&error),
            message: error.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "flvr",
    version,
    about = "Activity-time bond hedging: savings-account discounting, trendline \
             estimation, extreme-maturity hedges, FLVR panels and exact-model simulation"
)]
pub struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the savings account and the discounted index from raw CSVs.
    Ingest {
        /// Index-level CSV (`date,value` by default).
        #[arg(long)]
        index: Option<PathBuf>,
        /// T-bill discount-rate CSV, percent per annum.
        #[arg(long)]
        rates: Option<PathBuf>,
    },
    /// Estimate the initial activity time and fit the first-half trendline.
    Fit {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        rates: Option<PathBuf>,
    },
    /// Price and hedge one bond between two dates.
    Hedge {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        rates: Option<PathBuf>,
        /// Initiation date (default: the half-sample point).
        #[arg(long)]
        start: Option<NaiveDate>,
        /// Maturity date (default: the last observation).
        #[arg(long)]
        maturity: Option<NaiveDate>,
        /// Proportional transaction costs in basis points.
        #[arg(long)]
        cost_bp: Option<f64>,
    },
    /// Run the monthly panel of extreme-maturity hedges and the t-test.
    Panel {
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long)]
        term_min_months: Option<u32>,
        #[arg(long)]
        term_max_months: Option<u32>,
        #[arg(long)]
        cost_bp: Option<f64>,
        /// Significance level of the t-test.
        #[arg(long)]
        alpha: Option<f64>,
        /// First admissible initiation date (default: 10y after data start).
        #[arg(long)]
        init_start: Option<NaiveDate>,
        /// Last admissible initiation date (default: end of data).
        #[arg(long)]
        init_end: Option<NaiveDate>,
        /// Histogram bin count.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Re-run the t-test on a previously written panel CSV.
    Test {
        /// `panel.csv` produced by the panel subcommand.
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Simulate exact index dynamics; emit the oracle report, a hedge
    /// convergence table and sample paths.
    Simulate {
        #[arg(long)]
        s0: Option<f64>,
        /// Initial activity time (typically negative).
        #[arg(long, allow_negative_numbers = true)]
        tau0: Option<f64>,
        /// Activity-time slope per year.
        #[arg(long)]
        slope: Option<f64>,
        /// Horizon in years.
        #[arg(long)]
        horizon: Option<f64>,
        /// Rebalancing step in years.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Ingest { index, rates } => commands::cmd_ingest(&cli, &config, index, rates),
        Command::Fit { index, rates } => commands::cmd_fit(&cli, &config, index, rates),
        Command::Hedge {
            index,
            rates,
            start,
            maturity,
            cost_bp,
        } => commands::cmd_hedge(&cli, &config, index, rates, *start, *maturity, *cost_bp),
        Command::Panel {
            index,
            rates,
            term_min_months,
            term_max_months,
            cost_bp,
            alpha,
            init_start,
            init_end,
            bins,
        } => commands::cmd_panel(
            &cli,
            &config,
            index,
            rates,
            *term_min_months,
            *term_max_months,
            *cost_bp,
            *alpha,
            *init_start,
            *init_end,
            *bins,
        ),
        Command::Test { panel, alpha } => commands::cmd_test(&cli, &config, panel, *alpha),
        Command::Simulate {
            s0,
            tau0,
            slope,
            horizon,
            step,
            paths,
            seed,
        } => commands::cmd_simulate(
            &cli, &config, *s0, *tau0, *slope, *horizon, *step, *paths, *seed,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.kind.exit_code()
        }
    }
}
