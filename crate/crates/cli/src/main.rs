//! `cournot`: solve, map, differentiate and simulate the Cournot model with
//! emission-technology choice from a JSON configuration.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 solver error
//! (including a failed `verify`), 3 violated dynamics hypothesis.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cournot_core::CoreError;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "cournot", version, about = "Cournot equilibria with endogenous emission technology")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; CSV outputs get a sibling `.json` with metadata.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for `random_firms`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Tolerance: verification threshold, long-run gap, or root residual.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Iteration cap: best-response cross-check or long-run rounds.
    #[arg(long, global = true)]
    max_iter: Option<usize>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One-shot equilibrium: per-firm CSV and aggregate JSON.
    Solve,
    /// Two-firm regime map over a grid of coefficients.
    TwoFirmMap,
    /// Analytic partial derivatives checked by finite differences.
    Statics,
    /// Repeated game with accumulating carbon.
    Dynamics,
    /// Symmetric equilibrium under a non-quadratic utility.
    Utility,
    /// Equilibrium conditions of a saved `solve` JSON, or of a fresh solve.
    Verify {
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Settings {
    pub seed: u64,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub format: Option<Format>,
}

impl Settings {
    /// Format of commands that write tables; CSV unless asked otherwise.
    pub fn table_format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Solver(CoreError),
    Hypothesis(CoreError),
    VerificationFailed,
}

impl CliError {
    pub fn from_core(err: CoreError) -> Self {
        let mut inner = &err;
        while let CoreError::Round { source, .. } = inner {
            inner = source;
        }
        if matches!(inner, CoreError::Hypothesis { .. }) {
            CliError::Hypothesis(err)
        } else {
            CliError::Solver(err)
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) | CliError::VerificationFailed => 2,
            CliError::Hypothesis(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Solver(e) => write!(f, "solver error: {e}"),
            CliError::Hypothesis(e) => write!(f, "hypothesis violated: {e}"),
            CliError::VerificationFailed => write!(f, "verification failed; see the report"),
        }
    }
}

fn check_settings(cli: &Cli) -> Result<(), CliError> {
    if let Some(tol) = cli.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Config(format!("--tol: must be finite and > 0, got {tol}")));
        }
    }
    if cli.max_iter == Some(0) {
        return Err(CliError::Config("--max-iter: must be at least 1".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    check_settings(&cli)?;
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::Config("--out is required".into()))?;
    let config = RunConfig::load(config_path)?;
    if let Some(threads) = config::thread_cap()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("COURNOT_THREADS: {e}")))?;
    }
    let settings = Settings {
        seed: cli.seed,
        tol: cli.tol,
        max_iter: cli.max_iter,
        format: cli.format,
    };
    let outputs = match &cli.command {
        Command::Solve => commands::run_solve(&config, &settings, out)?,
        Command::TwoFirmMap => commands::run_two_firm_map(&config, &settings, out)?,
        Command::Statics => commands::run_statics(&config, &settings, out)?,
        Command::Dynamics => commands::run_dynamics(&config, &settings, out)?,
        Command::Utility => commands::run_utility(&config, &settings, out)?,
        Command::Verify { profile } => {
            let (outputs, passed) = commands::run_verify(&config, &settings, profile.as_deref(), out)?;
            outputs.write()?;
            return if passed { Ok(()) } else { Err(CliError::VerificationFailed) };
        }
    };
    outputs.write()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cournot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
