use std::path::{Path, PathBuf};

use anyhow::Result;

use mdd_pdmp::analytics::{mean_curve_with, second_moment_curve, variance_curve, MomentOptions, DEFAULT_RK4_STEP};
use mdd_pdmp::estimate::{fit_events, EmOptions, FitResult, InitStrategy, DEFAULT_DELTA, DEFAULT_MAX_ITER, DEFAULT_SMOOTHING};
use mdd_pdmp::io::{self, DateAxis};
use mdd_pdmp::records::{extract_records, prices_from_path, JumpEvent};
use mdd_pdmp::simulate::{monte_carlo, path_rng, sample_paths, simulate_path, EnsembleConfig, EnsembleStats};
use mdd_pdmp::{Error, ModelSpec, TimeGrid};

use crate::config::*;
use crate::{Cli, Command, EnsembleOptions, FitOptions, PriceArgs};

/// Largest tolerated gap between the two analytic routes.
const CROSS_CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NoConvergence,
    CrossCheckFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::NoConvergence => 4,
            Status::CrossCheckFailed => 5,
        }
    }
}

/// 2 for unreadable or malformed input and usage problems, 3 for values
/// outside the model's domain.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if !e.is_input_error() => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<Status> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Records(args) => {
            let input = require(args.prices.input.clone(), cfg.input.clone(), "input")?;
            let output = require(args.output, cfg.output.clone(), "output")?;
            records(&input, &output, &args.prices, &cfg)?;
            Ok(Status::Success)
        }
        Command::Fit(args) => {
            let events_path = require(args.events, cfg.events.clone(), "events")?;
            let output = require(args.output, cfg.output.clone(), "output")?;
            let unit = pick(args.time_unit, cfg.time_unit.clone(), DEFAULT_TIME_UNIT.into());
            let events = io::read_events(&events_path)?;
            let fit = fit(&events, &args.fit, &cfg, &output, &unit)?;
            Ok(if fit.converged { Status::Success } else { Status::NoConvergence })
        }
        Command::Simulate(args) => {
            let model = io::read_model(&require(args.model, cfg.model.clone(), "model")?)?;
            let output = require(args.output, cfg.output.clone(), "output")?;
            simulate(&model, &args.ensemble, &cfg, &output)?;
            Ok(Status::Success)
        }
        Command::Moments(args) => {
            let model = io::read_model(&require(args.model, cfg.model.clone(), "model")?)?;
            let output = require(args.output, cfg.output.clone(), "output")?;
            let grid = TimeGrid::uniform(
                pick(args.horizon, cfg.horizon, DEFAULT_HORIZON),
                pick(args.step, cfg.step, DEFAULT_STEP),
            )?;
            let opts = MomentOptions {
                rk4_step: pick(args.rk4_step, cfg.rk4_step, DEFAULT_RK4_STEP),
            };
            moments(
                &model,
                pick(args.r0, cfg.r0, 0.0),
                &grid,
                &opts,
                &output,
                args.mean_curve.or(cfg.mean_curve.clone()).as_deref(),
                args.variance_curve.or(cfg.variance_curve.clone()).as_deref(),
            )
        }
        Command::Pipeline(args) => {
            let input = require(args.prices.input.clone(), cfg.input.clone(), "input")?;
            let dir = require(args.out_dir, cfg.out_dir.clone(), "out-dir")?;
            std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            let unit = pick(args.prices.time_unit.clone(), cfg.time_unit.clone(), DEFAULT_TIME_UNIT.into());
            let events = records(&input, &dir.join("events.csv"), &args.prices, &cfg)?;
            let fit = fit(&events, &args.fit, &cfg, &dir.join("fit.json"), &unit)?;
            simulate(&fit.spec, &args.ensemble, &cfg, &dir.join("ensemble.csv"))?;
            Ok(if fit.converged { Status::Success } else { Status::NoConvergence })
        }
        Command::Synth(args) => {
            let model = io::read_model(&require(args.model, cfg.model.clone(), "model")?)?;
            let output = require(args.output, cfg.output.clone(), "output")?;
            let horizon = pick(args.horizon, cfg.horizon, DEFAULT_HORIZON);
            let seed = pick(args.seed, cfg.seed, DEFAULT_SEED);
            let initial = zero_based_state(args.initial_state.or(cfg.initial_state))?;
            let convention = pick(args.convention, cfg.convention, Default::default());
            let path = simulate_path(&model, 0.0, initial, horizon, convention, &mut path_rng(seed, 0))?;
            let prices = prices_from_path(&path, pick(args.base_price, cfg.base_price, DEFAULT_BASE_PRICE))?;
            io::save(&output, |out| io::write_prices(out, &prices))?;
            println!(
                "{} jumps over t in [0, {horizon}] (seed {seed}); {} price rows written to {}",
                path.len(),
                prices.len(),
                output.display()
            );
            Ok(Status::Success)
        }
    }
}

fn zero_based_state(state: Option<usize>) -> Result<Option<usize>> {
    match state {
        Some(0) => Err(Error::InvalidArgument("regimes are numbered from 1".into()).into()),
        Some(s) => Ok(Some(s - 1)),
        None => Ok(None),
    }
}

fn records(input: &Path, output: &Path, args: &PriceArgs, cfg: &ConfigFile) -> Result<Vec<JumpEvent>> {
    let axis = if args.calendar_days || cfg.calendar_days.unwrap_or(false) {
        DateAxis::CalendarDays
    } else {
        DateAxis::TradingDays
    };
    let unit = pick(args.time_unit.clone(), cfg.time_unit.clone(), DEFAULT_TIME_UNIT.into());
    let series = io::read_prices(input, axis)?;
    let events = extract_records(&series)?;
    io::save(output, |out| io::write_events(out, &events))?;
    match events.last() {
        None => eprintln!("warning: prices never fall below a running peak; no record events"),
        Some(last) => {
            let provisional = events.iter().filter(|e| e.provisional).count();
            println!(
                "{} record events from {} prices; final record {:.6} at t = {} {unit}{}",
                events.len(),
                series.len(),
                last.new_record,
                last.time,
                if provisional > 0 { " (provisional)" } else { "" }
            );
        }
    }
    Ok(events)
}

fn fit(events: &[JumpEvent], args: &FitOptions, cfg: &ConfigFile, output: &Path, unit: &str) -> Result<FitResult> {
    let k = pick(args.k, cfg.k, DEFAULT_K);
    let opts = EmOptions {
        delta: pick(args.delta, cfg.delta, DEFAULT_DELTA),
        max_iter: pick(args.max_iter, cfg.max_iter, DEFAULT_MAX_ITER),
        mode: pick(args.mode, cfg.mode, Default::default()),
        init: InitStrategy::KMeans,
        smoothing: pick(args.smoothing, cfg.smoothing, DEFAULT_SMOOTHING),
        q_estimate: pick(args.q_estimate, cfg.q_estimate, Default::default()),
    };
    let pairing = pick(args.pairing, cfg.pairing, Default::default());
    let result = fit_events(events, k, pairing, &opts)?;
    io::write_text(output, &result.to_json())?;
    print_fit(&result, unit);
    if !result.converged {
        eprintln!("warning: no convergence within {} iterations; best iterate written", opts.max_iter);
    }
    Ok(result)
}

fn print_fit(fit: &FitResult, unit: &str) {
    let spec = &fit.spec;
    println!("state  rate (1/{unit})  mean holding  Beta(alpha, beta)          jump mean");
    for i in 0..spec.k() {
        let law = spec.jump_laws()[i];
        println!(
            "{:>5}  {:>14.6e}  {:>12.4}  Beta({:>9.4}, {:>9.4})  {:>9.6}",
            i + 1,
            spec.lambda()[i],
            1.0 / spec.lambda()[i],
            law.alpha,
            law.beta,
            law.mean()
        );
    }
    println!("Q:");
    for i in 0..spec.k() {
        let row: Vec<String> = spec.q().row(i).iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", row.join("  "));
    }
    let pi: Vec<String> = spec.pi().iter().map(|v| format!("{v:.3}")).collect();
    println!("pi: {}", pi.join("  "));
    println!(
        "iterations: {}  converged: {}  log-likelihood: {:.6}",
        fit.iterations,
        fit.converged,
        fit.loglik_trace.last().copied().unwrap_or(f64::NAN)
    );
}

fn simulate(model: &ModelSpec, args: &EnsembleOptions, cfg: &ConfigFile, output: &Path) -> Result<EnsembleStats> {
    let ens = EnsembleConfig {
        r0: pick(args.r0, cfg.r0, 0.0),
        initial_state: zero_based_state(args.initial_state.or(cfg.initial_state))?,
        grid: TimeGrid::uniform(
            pick(args.horizon, cfg.horizon, DEFAULT_HORIZON),
            pick(args.step, cfg.step, DEFAULT_STEP),
        )?,
        n_paths: pick(args.n_paths, cfg.n_paths, DEFAULT_PATHS),
        seed: pick(args.seed, cfg.seed, DEFAULT_SEED),
        convention: pick(args.convention, cfg.convention, Default::default()),
    };
    let stats = monte_carlo(model, &ens)?;
    io::save(output, |out| io::write_ensemble(out, &stats))?;
    let paths_file: Option<PathBuf> = args.paths.clone().or(cfg.paths.clone());
    if let Some(path) = paths_file {
        let paths = sample_paths(model, &ens, MAX_EXPORTED_PATHS)?;
        io::save(&path, |out| io::write_paths(out, &paths))?;
    }
    let last = stats.grid.len() - 1;
    println!(
        "{} paths (seed {}), t = {}: mean {:.6}, var {:.6}, 5%-95% [{:.6}, {:.6}]",
        stats.n_paths, stats.seed, stats.grid[last], stats.mean[last], stats.var[last], stats.p05[last], stats.p95[last]
    );
    Ok(stats)
}

fn moments(
    model: &ModelSpec,
    r0: f64,
    grid: &TimeGrid,
    opts: &MomentOptions,
    output: &Path,
    mean_out: Option<&Path>,
    var_out: Option<&Path>,
) -> Result<Status> {
    let mean = mean_curve_with(model, r0, grid, opts)?;
    let second = second_moment_curve(model, r0, grid, opts)?;
    let var = variance_curve(model, r0, grid, opts)?;
    io::save(output, |out| io::write_moments(out, &mean, &var))?;
    if let Some(path) = mean_out {
        io::save(path, |out| io::write_moment_curve(out, &mean))?;
    }
    if let Some(path) = var_out {
        io::save(path, |out| io::write_variance_curve(out, &var))?;
    }
    let last = grid.len() - 1;
    println!(
        "t = {}: mean {:.6}, var {:.6}; variance peaks at t = {}",
        grid[last],
        mean.mixed[last],
        var.values[last],
        grid[var.values.iter().enumerate().fold(0, |b, (i, v)| if *v > var.values[b] { i } else { b })]
    );
    let mut status = Status::Success;
    for (name, check) in [("mean", mean.cross_check), ("second moment", second.cross_check)] {
        match check {
            Some(gap) => {
                println!("cross-check {name}: matrix exponential vs RK4 sup gap {gap:.3e}");
                if gap > CROSS_CHECK_TOLERANCE {
                    eprintln!("error: {name} routes disagree by {gap:.3e} (> {CROSS_CHECK_TOLERANCE:e})");
                    status = Status::CrossCheckFailed;
                }
            }
            None => println!("cross-check {name}: skipped, RK4 only (drift matrix near singular)"),
        }
    }
    Ok(status)
}
