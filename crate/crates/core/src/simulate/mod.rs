//! Sample paths of the record process and Monte Carlo ensembles.

mod ensemble;

pub use ensemble::{
    monte_carlo, sample_paths, simulate_values, simulate_values_sequential, EnsembleConfig, EnsembleStats,
    EnsembleValues,
};
#[cfg(feature = "parallel")]
pub use ensemble::simulate_values_parallel;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::records::{JumpEvent, Observations, Pairing};

/// Which regime's Beta law sizes a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpConvention {
    /// ρ is drawn from the law of the regime entered at the jump. This is the
    /// convention under which the moment ODEs hold.
    #[default]
    Destination,
    /// ρ is drawn from the law of the regime held before the jump, together
    /// with the holding time, and the transition is sampled afterwards.
    Source,
}

/// One realization of (R_t, ν_t) on [0, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub initial_record: f64,
    pub initial_state: usize,
    pub horizon: f64,
    /// T₁ < T₂ < … ≤ horizon.
    pub jump_times: Vec<f64>,
    /// Regime entered at each jump (J₁, J₂, …).
    pub states: Vec<usize>,
    /// Normalized jump sizes as drawn.
    pub rhos: Vec<f64>,
    /// Record levels R_{T₁} < R_{T₂} < ….
    pub records: Vec<f64>,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    fn jumps_up_to(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// R_t: the last record at or before `t`, else the initial level.
    pub fn value_at(&self, t: f64) -> f64 {
        match self.jumps_up_to(t) {
            0 => self.initial_record,
            n => self.records[n - 1],
        }
    }

    pub fn state_at(&self, t: f64) -> usize {
        match self.jumps_up_to(t) {
            0 => self.initial_state,
            n => self.states[n - 1],
        }
    }

    /// R at each of the sorted times in `grid`.
    pub fn values_on(&self, grid: &[f64], out: &mut [f64]) {
        let mut n = 0;
        for (slot, &t) in out.iter_mut().zip(grid) {
            while n < self.jump_times.len() && self.jump_times[n] <= t {
                n += 1;
            }
            *slot = if n == 0 { self.initial_record } else { self.records[n - 1] };
        }
    }
}

/// Independent, reproducible stream for path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Pre-built samplers for one model; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct PathSampler {
    holding: Vec<Exp<f64>>,
    jumps: Vec<Beta<f64>>,
    rows: Vec<WeightedIndex<f64>>,
    initial: WeightedIndex<f64>,
    convention: JumpConvention,
}

impl PathSampler {
    pub fn new(spec: &ModelSpec, convention: JumpConvention) -> Result<Self> {
        let k = spec.k();
        let weights = |w: Vec<f64>| {
            WeightedIndex::new(w).map_err(|e| Error::InvalidArgument(format!("bad probability vector: {e}")))
        };
        Ok(PathSampler {
            holding: spec
                .lambda()
                .iter()
                .map(|&l| Exp::new(l).map_err(|e| Error::InvalidArgument(e.to_string())))
                .collect::<Result<_>>()?,
            jumps: spec
                .jump_laws()
                .iter()
                .map(|law| Beta::new(law.alpha, law.beta).map_err(|e| Error::InvalidArgument(e.to_string())))
                .collect::<Result<_>>()?,
            rows: (0..k)
                .map(|i| weights(spec.q().row(i).iter().copied().collect()))
                .collect::<Result<_>>()?,
            initial: weights(spec.pi().to_vec())?,
            convention,
        })
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    fn draw_rho<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> f64 {
        // a draw rounding to 0 or 1 would stall or saturate the record
        loop {
            let rho = self.jumps[state].sample(rng);
            if rho > 0.0 && rho < 1.0 {
                return rho;
            }
        }
    }

    /// Simulates one path from (r0, ν0); ν0 is drawn from π when `None`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        r0: f64,
        initial_state: Option<usize>,
        horizon: f64,
        rng: &mut R,
    ) -> Result<SamplePath> {
        if !(0.0..1.0).contains(&r0) {
            return Err(Error::BadInitial(r0));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        let mut state = match initial_state {
            Some(s) if s >= self.k() => {
                return Err(Error::InvalidArgument(format!("initial state {s} out of range")));
            }
            Some(s) => s,
            None => self.initial.sample(rng),
        };
        let mut path = SamplePath {
            initial_record: r0,
            initial_state: state,
            horizon,
            jump_times: Vec::new(),
            states: Vec::new(),
            rhos: Vec::new(),
            records: Vec::new(),
        };
        let mut t = 0.0;
        let mut r = r0;
        loop {
            t += self.holding[state].sample(rng);
            let (next, rho) = match self.convention {
                JumpConvention::Destination => {
                    let next = self.rows[state].sample(rng);
                    (next, self.draw_rho(next, rng))
                }
                JumpConvention::Source => {
                    let rho = self.draw_rho(state, rng);
                    (self.rows[state].sample(rng), rho)
                }
            };
            if t > horizon {
                break;
            }
            r += rho * (1.0 - r);
            path.jump_times.push(t);
            path.states.push(next);
            path.rhos.push(rho);
            path.records.push(r);
            state = next;
        }
        Ok(path)
    }
}

/// Jump sequence of the embedded chain without the record level, for
/// estimation studies far longer than a record path can resolve.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSequence {
    pub initial_state: usize,
    /// Time since the previous jump (since 0 for the first).
    pub inter_arrival: Vec<f64>,
    /// Regime entered at each jump.
    pub states: Vec<usize>,
    pub rhos: Vec<f64>,
}

impl JumpSequence {
    pub fn observations(&self, pairing: Pairing) -> Result<Observations> {
        Observations::from_pairs(&self.inter_arrival, &self.rhos, pairing)
    }

    /// True state of each observation produced by [`Self::observations`].
    pub fn observation_states(&self, pairing: Pairing) -> Vec<usize> {
        match pairing {
            Pairing::Following => self.states[..self.states.len().saturating_sub(1)].to_vec(),
            Pairing::Preceding => match self.states.len() {
                0 => Vec::new(),
                _ => std::iter::once(self.initial_state)
                    .chain(self.states[..self.states.len() - 1].iter().copied())
                    .collect(),
            },
        }
    }
}

impl PathSampler {
    /// Draws `count` jumps with the same per-jump draw order as [`Self::sample`].
    pub fn sample_jumps<R: Rng + ?Sized>(&self, count: usize, initial_state: Option<usize>, rng: &mut R) -> Result<JumpSequence> {
        let mut state = match initial_state {
            Some(s) if s >= self.k() => {
                return Err(Error::InvalidArgument(format!("initial state {s} out of range")));
            }
            Some(s) => s,
            None => self.initial.sample(rng),
        };
        let mut seq = JumpSequence {
            initial_state: state,
            inter_arrival: Vec::with_capacity(count),
            states: Vec::with_capacity(count),
            rhos: Vec::with_capacity(count),
        };
        for _ in 0..count {
            let hold = self.holding[state].sample(rng);
            let (next, rho) = match self.convention {
                JumpConvention::Destination => {
                    let next = self.rows[state].sample(rng);
                    (next, self.draw_rho(next, rng))
                }
                JumpConvention::Source => {
                    let rho = self.draw_rho(state, rng);
                    (self.rows[state].sample(rng), rho)
                }
            };
            seq.inter_arrival.push(hold);
            seq.states.push(next);
            seq.rhos.push(rho);
            state = next;
        }
        Ok(seq)
    }
}

/// Simulates a single path; see [`PathSampler::sample`].
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &ModelSpec,
    r0: f64,
    initial_state: Option<usize>,
    horizon: f64,
    convention: JumpConvention,
    rng: &mut R,
) -> Result<SamplePath> {
    PathSampler::new(spec, convention)?.sample(r0, initial_state, horizon, rng)
}

/// Minimum headroom 1 − r below which a jump cannot be normalized.
pub const MIN_HEADROOM: f64 = 1e-12;

/// Inverts the jump construction: one event per jump with
/// ρ = (R_{T_n} − R_{T_{n−1}}) / (1 − R_{T_{n−1}}), times measured from 0.
pub fn path_to_events(path: &SamplePath) -> Result<Vec<JumpEvent>> {
    let mut prev_record = path.initial_record;
    let mut prev_time = 0.0;
    let mut events = Vec::with_capacity(path.len());
    for ((&time, &record), &state) in path.jump_times.iter().zip(&path.records).zip(&path.states) {
        let headroom = 1.0 - prev_record;
        if headroom < MIN_HEADROOM {
            return Err(Error::DegenerateRecord(prev_record));
        }
        events.push(JumpEvent {
            time,
            inter_arrival: time - prev_time,
            prev_record,
            new_record: record,
            rho: (record - prev_record) / headroom,
            label: Some(state),
            provisional: false,
        });
        prev_record = record;
        prev_time = time;
    }
    Ok(events)
}
