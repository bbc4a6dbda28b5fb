//! Command-line front end: synthesize spectra, run the inverse pipeline,
//! sweep parameter grids, and aggregate reports.

mod commands;
mod config;
mod io;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

/// Exit-code classification: 1 for bad inputs, 2 for numerical failures.
#[derive(Debug)]
pub enum CliError {
    Input(anyhow::Error),
    Numeric(anyhow::Error),
}

impl CliError {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError::Input(e.into())
    }

    pub fn numeric(e: impl Into<anyhow::Error>) -> Self {
        CliError::Numeric(e.into())
    }

    /// Sorts a core error into the input/numeric split: everything a user
    /// could have caused with a config is input; solver and fit failures on
    /// valid inputs are numeric.
    pub fn from_core(e: modesplit_core::error::Error) -> Self {
        use modesplit_core::error::Error as E;
        match e {
            E::InvalidInput(_) | E::EmptyBand | E::GridMismatch | E::Resolution { .. } => {
                CliError::Input(anyhow::anyhow!("{e}"))
            }
            E::Convergence(_)
            | E::FitDiverged { .. }
            | E::InsufficientData { .. }
            | E::AmbiguousAssignment
            | E::WindowTooNarrow { .. }
            | E::InconsistentEllipticity => CliError::Numeric(anyhow::anyhow!("{e}")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Inclusive mode-order range parsed from `A..B`.
#[derive(Debug, Clone, Copy)]
pub struct OrderRange {
    pub min: u32,
    pub max: u32,
}

fn parse_orders(s: &str) -> Result<OrderRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let min: u32 = a.trim().parse().map_err(|e| format!("bad order {a:?}: {e}"))?;
    let max: u32 = b.trim().parse().map_err(|e| format!("bad order {b:?}: {e}"))?;
    if min < 1 || max < min {
        return Err("need 1 <= A <= B".into());
    }
    Ok(OrderRange { min, max })
}

#[derive(Parser)]
#[command(
    name = "modesplit",
    version,
    about = "Flexural mode-splitting toolkit for suspended nanowaveguides"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict mode-pair frequencies and splitting ratios for configured beams.
    Simulate {
        /// Beam configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the pair tables.
        #[arg(long)]
        out: PathBuf,
        /// Inclusive mode-order range, e.g. 1..30.
        #[arg(long, value_parser = parse_orders)]
        orders: Option<OrderRange>,
        /// Also emit an SVG plot of ratio against order.
        #[arg(long)]
        svg: bool,
    },
    /// Synthesize a thermomechanical power spectrum.
    Synth {
        /// Scenario configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Noise seed; overrides the config, defaults to entropy.
        #[arg(long)]
        seed: Option<u64>,
        /// Output spectrum CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also emit an SVG plot of the spectrum.
        #[arg(long)]
        svg: bool,
    },
    /// Estimate ellipticity and probe angle from a spectrum CSV.
    Analyze {
        /// Input spectrum CSV (`frequency_hz,psd`, header optional).
        input: PathBuf,
        /// Analyzer options (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output report JSON; a pair table CSV lands next to it.
        #[arg(long)]
        out: PathBuf,
        /// Also emit an SVG of the spectrum with fitted pairs marked.
        #[arg(long)]
        svg: bool,
    },
    /// Run a parameter sweep; point failures are recorded, not fatal.
    Sweep {
        /// Sweep configuration (JSON, tagged by "mode").
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Combine analysis reports into a mean and spread of the ellipticity.
    ReportAggregate {
        /// Report JSON files to aggregate.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output summary JSON.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            orders,
            svg,
        } => commands::simulate(&config, &out, orders, svg),
        Command::Synth {
            config,
            seed,
            out,
            svg,
        } => commands::synth(&config, seed, &out, svg),
        Command::Analyze {
            input,
            config,
            out,
            svg,
        } => commands::analyze(&input, config.as_deref(), &out, svg),
        Command::Sweep { config, out, jobs } => commands::sweep(&config, &out, jobs),
        Command::ReportAggregate { inputs, out } => commands::report_aggregate(&inputs, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
