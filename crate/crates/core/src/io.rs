//! File formats: price and event CSVs in, curve/ensemble/path CSVs and JSON
//! out. Floating-point output uses 17 significant digits so values round-trip.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::analytics::{MomentCurve, VarianceCurve};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::records::{JumpEvent, PriceSeries};
use crate::simulate::{EnsembleStats, SamplePath};

/// How ISO dates in a price file become times. Numeric times are always
/// used as given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DateAxis {
    /// Row index of the observation, so weekends and holidays take no time.
    #[default]
    TradingDays,
    /// Days elapsed since the first date.
    CalendarDays,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_error(path))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

enum TimeField {
    Number(f64),
    Date(NaiveDate),
}

fn parse_time(field: &str) -> Option<TimeField> {
    if let Ok(t) = field.parse::<f64>() {
        return t.is_finite().then_some(TimeField::Number(t));
    }
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(field.get(..10).unwrap_or(field), "%Y-%m-%d"))
        .ok()
        .map(TimeField::Date)
}

/// Reads a `date,close` file; `path` is only used in error messages.
pub fn parse_prices<R: Read>(input: R, path: &Path, axis: DateAxis) -> Result<PriceSeries> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return Err(parse_error(path, 1, "expected a header with two columns: date,close"));
    }
    let mut times = Vec::new();
    let mut prices = Vec::new();
    let mut first_date: Option<NaiveDate> = None;
    let mut numeric: Option<bool> = None;
    let mut prev_date: Option<NaiveDate> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let (Some(t_field), Some(p_field)) = (record.get(0), record.get(1)) else {
            return Err(parse_error(path, line, "expected two fields"));
        };
        let time = parse_time(t_field)
            .ok_or_else(|| parse_error(path, line, format!("'{t_field}' is neither a number nor a YYYY-MM-DD date")))?;
        let close: f64 = p_field
            .parse()
            .map_err(|_| parse_error(path, line, format!("close '{p_field}' is not a number")))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(parse_error(path, line, format!("close must be positive, got {p_field}")));
        }
        let t = match time {
            TimeField::Number(t) => {
                if numeric == Some(false) {
                    return Err(parse_error(path, line, "mixes numeric times with dates"));
                }
                numeric = Some(true);
                t
            }
            TimeField::Date(d) => {
                if numeric == Some(true) {
                    return Err(parse_error(path, line, "mixes dates with numeric times"));
                }
                numeric = Some(false);
                if prev_date.is_some_and(|p| d <= p) {
                    return Err(parse_error(path, line, format!("date {d} does not follow the previous row")));
                }
                prev_date = Some(d);
                let first = *first_date.get_or_insert(d);
                match axis {
                    DateAxis::TradingDays => times.len() as f64,
                    DateAxis::CalendarDays => (d - first).num_days() as f64,
                }
            }
        };
        if times.last().is_some_and(|&prev| t <= prev) {
            return Err(parse_error(path, line, format!("time {t_field} does not follow the previous row")));
        }
        times.push(t);
        prices.push(close);
    }
    PriceSeries::new(times, prices)
}

pub fn read_prices(path: &Path, axis: DateAxis) -> Result<PriceSeries> {
    parse_prices(open(path)?, path, axis)
}

pub const EVENTS_HEADER: [&str; 6] = ["t", "inter_arrival", "prev_record", "new_record", "rho", "provisional"];

pub fn parse_events<R: Read>(input: R, path: &Path) -> Result<Vec<JumpEvent>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().ne(EVENTS_HEADER) {
        return Err(parse_error(path, 1, format!("expected header {}", EVENTS_HEADER.join(","))));
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            let field = record.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(path, line, format!("{} '{field}' is not a number", EVENTS_HEADER[i])))
        };
        let provisional = match record.get(5).unwrap_or("") {
            "true" | "1" => true,
            "false" | "0" => false,
            other => return Err(parse_error(path, line, format!("provisional '{other}' is not a boolean"))),
        };
        events.push(JumpEvent {
            time: num(0)?,
            inter_arrival: num(1)?,
            prev_record: num(2)?,
            new_record: num(3)?,
            rho: num(4)?,
            label: None,
            provisional,
        });
    }
    Ok(events)
}

pub fn read_events(path: &Path) -> Result<Vec<JumpEvent>> {
    parse_events(open(path)?, path)
}

pub fn write_events<W: Write>(out: &mut W, events: &[JumpEvent]) -> std::io::Result<()> {
    writeln!(out, "{}", EVENTS_HEADER.join(","))?;
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(e.time),
            fmt_f64(e.inter_arrival),
            fmt_f64(e.prev_record),
            fmt_f64(e.new_record),
            fmt_f64(e.rho),
            e.provisional
        )?;
    }
    Ok(())
}

pub fn write_prices<W: Write>(out: &mut W, series: &PriceSeries) -> std::io::Result<()> {
    writeln!(out, "date,close")?;
    for (t, p) in series.times().iter().zip(series.prices()) {
        writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*p))?;
    }
    Ok(())
}

pub fn write_ensemble<W: Write>(out: &mut W, stats: &EnsembleStats) -> std::io::Result<()> {
    writeln!(out, "t,mean,var,p05,p95")?;
    for i in 0..stats.grid.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(stats.grid[i]),
            fmt_f64(stats.mean[i]),
            fmt_f64(stats.var[i]),
            fmt_f64(stats.p05[i]),
            fmt_f64(stats.p95[i])
        )?;
    }
    Ok(())
}

/// One row per jump plus the starting row at time 0; states are 1-based.
pub fn write_paths<W: Write>(out: &mut W, paths: &[SamplePath]) -> std::io::Result<()> {
    writeln!(out, "path_id,T_n,state,record")?;
    for (id, path) in paths.iter().enumerate() {
        writeln!(out, "{id},{},{},{}", fmt_f64(0.0), path.initial_state + 1, fmt_f64(path.initial_record))?;
        for ((t, s), r) in path.jump_times.iter().zip(&path.states).zip(&path.records) {
            writeln!(out, "{id},{},{},{}", fmt_f64(*t), s + 1, fmt_f64(*r))?;
        }
    }
    Ok(())
}

pub fn write_moments<W: Write>(out: &mut W, mean: &MomentCurve, var: &VarianceCurve) -> std::io::Result<()> {
    writeln!(out, "t,mean,var")?;
    for ((t, m), v) in mean.grid.iter().zip(&mean.mixed).zip(&var.values) {
        writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*m), fmt_f64(*v))?;
    }
    Ok(())
}

/// `t,mixed,state_1,…,state_k`.
pub fn write_moment_curve<W: Write>(out: &mut W, curve: &MomentCurve) -> std::io::Result<()> {
    let k = curve.per_state.nrows();
    let states: Vec<String> = (1..=k).map(|i| format!("state_{i}")).collect();
    writeln!(out, "t,mixed,{}", states.join(","))?;
    for (i, t) in curve.grid.iter().enumerate() {
        let cols: Vec<String> = (0..k).map(|s| fmt_f64(curve.per_state[(s, i)])).collect();
        writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(curve.mixed[i]), cols.join(","))?;
    }
    Ok(())
}

/// `t,var` plus a `bound` column for single-regime models.
pub fn write_variance_curve<W: Write>(out: &mut W, curve: &VarianceCurve) -> std::io::Result<()> {
    match &curve.bound {
        Some(bound) => {
            writeln!(out, "t,var,bound")?;
            for ((t, v), b) in curve.grid.iter().zip(&curve.values).zip(bound) {
                writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(*v), fmt_f64(*b))?;
            }
        }
        None => {
            writeln!(out, "t,var")?;
            for (t, v) in curve.grid.iter().zip(&curve.values) {
                writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v))?;
            }
        }
    }
    Ok(())
}

/// Creates `path` and hands a buffered writer to `write`.
pub fn save<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(io_error(path))
}

pub fn read_model(path: &Path) -> Result<ModelSpec> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(io_error(path))?;
    ModelSpec::from_json(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::Json {
            path: PathBuf::from(path),
            source,
        },
        other => other,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    save(path, |out| out.write_all(text.as_bytes()))
}
