//! `spillcast` command-line front end.

mod commands;
mod error;
mod manifest;
mod models;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, EXIT_NUMERICAL};

#[derive(Debug, Parser)]
#[command(
    name = "spillcast",
    version,
    about = "Onset-risk and severity forecasting for mosquito-borne spillover"
)]
pub struct Cli {
    /// INI config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed recorded in the manifest. The pipeline itself is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the compartmental model over a weather file.
    Simulate(SimulateArgs),
    /// Calibrate K and fit the onset density from historical cases.
    FitOnset(FitArgs),
    /// Daily onset risk over a target year.
    PredictOnset(PredictOnsetArgs),
    /// Calibrate K and fit the severity rate surface.
    FitSeverity(FitArgs),
    /// Severity on observed weather.
    EstimateSeverity(EstimateArgs),
    /// Severity forecast over a target year.
    PredictSeverity(PredictSeverityArgs),
    /// Weekly log scores of the Bayesian and negative-binomial models.
    Evaluate(EvaluateArgs),
    /// Annual high-risk indicators and their linear trend.
    Trend(TrendArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KArg {
    Csv,
    Mean,
    Ar,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Long,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Uniform,
    Gaussian,
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Bayes,
    Nb,
    Both,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub weather: PathBuf,
    /// Source of daily K.
    #[arg(long, value_enum, default_value = "csv")]
    pub k: KArg,
    /// `date,K` file for `--k csv`.
    #[arg(long)]
    pub k_file: Option<PathBuf>,
    /// Case file used to calibrate K for the other methods.
    #[arg(long)]
    pub cases: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub weather: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    /// K predictor stored with the model; defaults to the config value.
    #[arg(long, value_enum)]
    pub k: Option<KArg>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub weather: PathBuf,
    #[arg(long)]
    pub year: i32,
    #[arg(long, value_enum, default_value = "long")]
    pub mode: ModeArg,
    /// Short-term window in days; defaults to the config value.
    #[arg(long)]
    pub lead: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictOnsetArgs {
    /// Onset model written by `fit-onset`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub forecast: ForecastArgs,
}

#[derive(Debug, Args)]
pub struct SeverityOptions {
    /// Severity model written by `fit-severity`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    /// Onset model; when given, green days report zero cases.
    #[arg(long)]
    pub onset_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub severity: SeverityOptions,
    #[arg(long)]
    pub weather: PathBuf,
    /// Restrict to one calendar year.
    #[arg(long)]
    pub year: Option<i32>,
}

#[derive(Debug, Args)]
pub struct PredictSeverityArgs {
    #[command(flatten)]
    pub severity: SeverityOptions,
    #[command(flatten)]
    pub forecast: ForecastArgs,
    /// Severity start date, e.g. from an onset forecast; earlier days
    /// report zero cases.
    #[arg(long)]
    pub start: Option<chrono::NaiveDate>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum, default_value = "both")]
    pub model: ModelArg,
    #[arg(long)]
    pub cases: PathBuf,
    /// Severity model; required for `bayes` and `both`.
    #[arg(long)]
    pub severity_model: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    #[arg(long)]
    pub onset_model: Option<PathBuf>,
    #[command(flatten)]
    pub forecast: ForecastArgs,
}

#[derive(Debug, Args)]
pub struct TrendArgs {
    #[arg(long)]
    pub weather: PathBuf,
    /// Onset model written by `fit-onset`.
    #[arg(long)]
    pub model: PathBuf,
    /// Inclusive year range `A..B`.
    #[arg(long, value_parser = parse_years)]
    pub years: (i32, i32),
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: i32 = a.trim().parse().map_err(|_| format!("bad year `{a}`"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("bad year `{b}`"))?;
    if b < a {
        return Err(format!("empty year range {a}..{b}"));
    }
    Ok((a, b))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = std::panic::catch_unwind(|| commands::run(&cli));
    let outcome = result.unwrap_or_else(|_| {
        Err(CliError::Numerical(
            "internal error while running the command".into(),
        ))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code().clamp(1, EXIT_NUMERICAL) as u8)
        }
    }
}
