mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdd_core::FddError;

use crate::artifacts::Artifacts;
use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad config file or values (exit 2).
    Config(String),
    /// A numerical invariant failed (exit 3).
    Numerical(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical invariant failed: {m}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<FddError> for CliError {
    fn from(e: FddError) -> Self {
        match e {
            FddError::Io(io) => CliError::Io(io),
            FddError::InvalidGrid(_)
            | FddError::InvalidParameter(_)
            | FddError::GridTooSmall { .. }
            | FddError::CanvasTooSmall { .. }
            | FddError::AboveNyquist { .. }
            | FddError::BelowBudgetFloor { .. }
            | FddError::CutoffUnreachable { .. }
            | FddError::OffLattice { .. }
            | FddError::NotHalfPlane { .. }
            | FddError::DuplicateMode { .. }
            | FddError::MalformedField(_)
            | FddError::Json(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Fourier domain division imaging: OTFs, Fisher information, photon
/// budgets, shot-noise simulation and reconstruction.
#[derive(Parser)]
#[command(name = "fdd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "fdd-out")]
    out: PathBuf,
    /// Number of Monte Carlo trials (overrides acquisition.trials).
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,
    /// Base seed (overrides acquisition.seed; validation.seed for `validate`).
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full and per-region OTFs, PSF and axis profiles.
    Otf,
    /// QFI, FI and CRB curves along the k_x axis.
    Fisher,
    /// Minimum photon budgets and achievable resolution.
    Budget,
    /// Noisy FDD acquisitions.
    Simulate,
    /// FDD and DI deconvolution reconstructions and Fourier estimates.
    Reconstruct {
        /// Reconstruct a saved acquisition instead of simulating one.
        #[arg(long, value_name = "DIR")]
        raw: Option<PathBuf>,
    },
    /// Per-frame and fused SNR with both noise estimates.
    Snr,
    /// One-dimensional numeric vs analytic Fisher information check.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Otf => "otf",
            Command::Fisher => "fisher",
            Command::Budget => "budget",
            Command::Simulate => "simulate",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Snr => "snr",
            Command::Validate => "validate",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(t) = cli.trials {
        cfg.acquisition.trials = t;
    }
    if let Some(s) = cli.seed {
        match cli.command {
            Command::Validate => cfg.validation.seed = s,
            _ => cfg.acquisition.seed = s,
        }
    }
    cfg.validate()?;

    let mut art = Artifacts::new(&cli.out)?;
    let outcome = match &cli.command {
        Command::Otf => commands::otf(&cfg, &mut art)?,
        Command::Fisher => commands::fisher(&cfg, &mut art)?,
        Command::Budget => commands::budget(&cfg, &mut art)?,
        Command::Simulate => commands::simulate(&cfg, &mut art)?,
        Command::Reconstruct { raw } => commands::reconstruct(&cfg, raw.as_deref(), &mut art)?,
        Command::Snr => commands::snr(&cfg, &mut art)?,
        Command::Validate => commands::validate(&cfg, &mut art)?,
    };
    let manifest = art.finish(cli.command.name(), &cfg)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("manifest: {}", manifest.display());
    match outcome.failure {
        Some(reason) => Err(CliError::Numerical(reason)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fdd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
