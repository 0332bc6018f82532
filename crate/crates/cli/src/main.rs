//! `mdd-pdmp`: drawdown records, model fitting, Monte Carlo ensembles and
//! analytic moment curves from the command line.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 domain error,
//! 4 fit did not converge (output still written), 5 analytic cross-check
//! disagreement above 1e-6 (output still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use mdd_pdmp::estimate::{EmMode, QEstimate};
use mdd_pdmp::records::Pairing;
use mdd_pdmp::simulate::JumpConvention;

#[derive(Debug, Parser)]
#[command(name = "mdd-pdmp", version, about = "Drawdown records as a regime-switching jump process")]
pub struct Cli {
    /// JSON file with default values for any flag (keys in snake_case).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract drawdown record events from a `date,close` price file.
    Records(RecordsArgs),
    /// Fit a k-state model to an events file.
    Fit(FitArgs),
    /// Monte Carlo ensemble statistics of the record process.
    Simulate(SimulateArgs),
    /// Analytic mean and variance curves.
    Moments(MomentsArgs),
    /// records, fit and simulate in one go.
    Pipeline(PipelineArgs),
    /// Synthetic price series whose records follow a given model.
    Synth(SynthArgs),
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| format!("unrecognized value '{s}'"))
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Price file with header `date,close`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Measure ISO dates in calendar days instead of trading days.
    #[arg(long)]
    calendar_days: bool,
    /// Label for the time axis in summaries; values are never rescaled.
    #[arg(long)]
    time_unit: Option<String>,
}

#[derive(Debug, Args)]
pub struct RecordsArgs {
    #[command(flatten)]
    prices: PriceArgs,
    /// Events CSV to write.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitOptions {
    /// Number of regimes.
    #[arg(short, long)]
    k: Option<usize>,
    /// Convergence threshold on the change in total log-likelihood.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// soft (mixture posteriors) or hard (argmax relabeling).
    #[arg(long, value_parser = parse_enum::<EmMode>)]
    mode: Option<EmMode>,
    /// following (jump with the holding time after it) or preceding.
    #[arg(long, value_parser = parse_enum::<Pairing>)]
    pairing: Option<Pairing>,
    /// Additive smoothing of transition counts.
    #[arg(long)]
    smoothing: Option<f64>,
    /// deconvolved or counts.
    #[arg(long, value_parser = parse_enum::<QEstimate>)]
    q_estimate: Option<QEstimate>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Events CSV as written by `records`.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Fit JSON to write.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOptions,
    #[arg(long)]
    time_unit: Option<String>,
}

#[derive(Debug, Args)]
pub struct EnsembleOptions {
    /// Initial record level in [0, 1).
    #[arg(long)]
    r0: Option<f64>,
    /// Last time of the evaluation grid.
    #[arg(long)]
    horizon: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    step: Option<f64>,
    /// Number of simulated paths.
    #[arg(short = 'n', long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// destination (jump size from the regime entered) or source.
    #[arg(long, value_parser = parse_enum::<JumpConvention>)]
    convention: Option<JumpConvention>,
    /// Start every path in this 1-based regime instead of drawing from π.
    #[arg(long)]
    initial_state: Option<usize>,
    /// Also write up to 10 raw paths here.
    #[arg(long)]
    paths: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON (a fit file also works).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Ensemble CSV to write.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    ensemble: EnsembleOptions,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// `t,mean,var` CSV to write.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// RK4 step size.
    #[arg(long)]
    rk4_step: Option<f64>,
    /// Also write `t,mixed,state_1,...` for the mean.
    #[arg(long)]
    mean_curve: Option<PathBuf>,
    /// Also write `t,var[,bound]`.
    #[arg(long)]
    variance_curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    prices: PriceArgs,
    /// Directory for events.csv, fit.json and ensemble.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    fit: FitOptions,
    #[command(flatten)]
    ensemble: EnsembleOptions,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Price CSV to write.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Length of the simulated path.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_enum::<JumpConvention>)]
    convention: Option<JumpConvention>,
    #[arg(long)]
    initial_state: Option<usize>,
    /// Price level before the first drawdown.
    #[arg(long)]
    base_price: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
