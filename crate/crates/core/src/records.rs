//! Drawdowns of a price series and the record events they produce.
//!
//! The drawdown at time t is relative to the running peak,
//! `D_t = (M_t − P_t) / M_t` with `M_t = max_{s≤t} P_s`, so it lives in
//! [0, 1). A record is confirmed at the deepest point of each excursion
//! above the previous record: index t is an event when `D_t` exceeds every
//! earlier drawdown and the next observation does not go deeper. An
//! excursion still deepening at the end of the series yields a provisional
//! event.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{SamplePath, MIN_HEADROOM};

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    times: Vec<f64>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Times must be finite and strictly increasing, prices finite and positive.
    pub fn new(times: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if times.len() != prices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times for {} prices",
                times.len(),
                prices.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::BadSeries(format!("time at index {i} is not finite")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::BadSeries(format!("times not strictly increasing at index {}", i + 1)));
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::BadSeries(format!("price at index {i} is not positive: {}", prices[i])));
        }
        Ok(PriceSeries { times, prices })
    }

    /// Prices observed at times 0, 1, 2, ….
    pub fn from_prices(prices: Vec<f64>) -> Result<Self> {
        Self::new((0..prices.len()).map(|i| i as f64).collect(), prices)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// One confirmed (or provisional) drawdown record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    /// Time since the previous record, or since the series start for the first.
    pub inter_arrival: f64,
    pub prev_record: f64,
    pub new_record: f64,
    /// (new − prev) / (1 − prev).
    pub rho: f64,
    /// Regime tag, when known (simulated data) or estimated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default)]
    pub provisional: bool,
}

/// Relative drawdown at every observation, in one pass.
pub fn drawdown_series(series: &PriceSeries) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut peak = f64::MIN;
    Ok(series
        .prices()
        .iter()
        .map(|&p| {
            peak = peak.max(p);
            (peak - p) / peak
        })
        .collect())
}

/// Record events of the drawdown process; empty when prices never fall.
pub fn extract_records(series: &PriceSeries) -> Result<Vec<JumpEvent>> {
    let dd = drawdown_series(series)?;
    let times = series.times();
    let mut events = Vec::new();
    let mut record = 0.0;
    let mut last_time = times[0];
    for i in 0..dd.len() {
        if dd[i] <= record {
            continue;
        }
        let provisional = i + 1 == dd.len();
        if !provisional && dd[i + 1] > dd[i] {
            continue;
        }
        let headroom = 1.0 - record;
        if headroom < MIN_HEADROOM {
            return Err(Error::DegenerateRecord(record));
        }
        events.push(JumpEvent {
            time: times[i],
            inter_arrival: times[i] - last_time,
            prev_record: record,
            new_record: dd[i],
            rho: (dd[i] - record) / headroom,
            label: None,
            provisional,
        });
        record = dd[i];
        last_time = times[i];
    }
    Ok(events)
}

/// Cumulative record levels r_i = r_{i−1} + ρ_i (1 − r_{i−1}).
pub fn reconstruct_records(initial: f64, rhos: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut r = initial;
    rhos.into_iter()
        .map(|rho| {
            r += rho * (1.0 - r);
            r
        })
        .collect()
}

/// How holding times are paired with jump sizes for estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Jump i with the holding time that follows it (T_{i+1} − T_i). Both are
    /// governed by the regime entered at jump i; the last event is dropped.
    #[default]
    Following,
    /// Jump i with its own inter-arrival time (T_i − T_{i−1}); both come from
    /// one regime when jumps are sized by the regime they leave.
    Preceding,
}

/// Estimator input: holding times `x` and normalized jump sizes `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Observations {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!("{} holding times for {} jumps", x.len(), y.len())));
        }
        Ok(Observations { x, y })
    }

    /// Pairs per-jump inter-arrival times and jump sizes.
    pub fn from_pairs(inter_arrival: &[f64], rho: &[f64], pairing: Pairing) -> Result<Self> {
        if inter_arrival.len() != rho.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inter-arrival times for {} jumps",
                inter_arrival.len(),
                rho.len()
            )));
        }
        if rho.is_empty() {
            return Err(Error::EmptyEvents);
        }
        let (x, y) = match pairing {
            Pairing::Preceding => (inter_arrival.to_vec(), rho.to_vec()),
            Pairing::Following => (inter_arrival[1..].to_vec(), rho[..rho.len() - 1].to_vec()),
        };
        if x.is_empty() {
            return Err(Error::EmptyEvents);
        }
        Ok(Observations { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Holding times expressed in a unit `factor` times smaller.
    pub fn rescaled(&self, factor: f64) -> Self {
        Observations {
            x: self.x.iter().map(|x| x * factor).collect(),
            y: self.y.clone(),
        }
    }
}

pub fn events_to_observations(events: &[JumpEvent], pairing: Pairing) -> Result<Observations> {
    let x: Vec<f64> = events.iter().map(|e| e.inter_arrival).collect();
    let y: Vec<f64> = events.iter().map(|e| e.rho).collect();
    Observations::from_pairs(&x, &y, pairing)
}

/// Price series whose record events reproduce a simulated path exactly.
///
/// The price sits at `base` until the first jump, drops to `base·(1 − r_n)`
/// at each jump time T_n, and recovers halfway (`base·(1 − r_n/2)`) midway to
/// the next jump. The path must start from a zero record.
pub fn prices_from_path(path: &SamplePath, base: f64) -> Result<PriceSeries> {
    if path.initial_record != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic prices need a path starting at record 0, got {}",
            path.initial_record
        )));
    }
    if !(base > 0.0 && base.is_finite()) {
        return Err(Error::InvalidArgument(format!("base price must be positive, got {base}")));
    }
    let mut times = vec![0.0];
    let mut prices = vec![base];
    for (n, (&t, &r)) in path.jump_times.iter().zip(&path.records).enumerate() {
        times.push(t);
        prices.push(base * (1.0 - r));
        let next = path.jump_times.get(n + 1).copied().unwrap_or(path.horizon);
        if next > t {
            times.push(t + 0.5 * (next - t));
            prices.push(base * (1.0 - 0.5 * r));
        }
    }
    PriceSeries::new(times, prices)
}
