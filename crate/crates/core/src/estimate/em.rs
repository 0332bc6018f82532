use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mle::{fit_beta_weighted, fit_exponential_weighted};
use crate::error::{Error, Result};
use crate::model::{BetaLaw, ModelSpec};
use crate::records::{events_to_observations, JumpEvent, Observations, Pairing};

pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_SMOOTHING: f64 = 0.5;
/// Fewer (effective) events than this in a state triggers a reseed.
pub const MIN_PER_STATE: usize = 5;
/// Events required per state before fitting is attempted.
pub const EVENTS_PER_STATE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmMode {
    /// Mixture EM: every event contributes to every state in proportion to
    /// its posterior weight.
    #[default]
    Soft,
    /// Classification loop: fit on labeled groups, relabel each event by the
    /// state under which it is most likely, repeat.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitStrategy {
    /// k-means on standardized (log holding time, logit jump size).
    #[default]
    KMeans,
    /// Equal-count split on sorted log holding time.
    QuantileSplit,
    /// Explicit 0-based starting labels, one per observation.
    Labels(Vec<usize>),
}

/// How the transition matrix is estimated from state posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QEstimate {
    /// Posterior pair counts corrected for assignment uncertainty.
    #[default]
    Deconvolved,
    /// Posterior pair counts Σ r_n(i) r_{n+1}(j) as they are; with hard
    /// labels these are plain transition counts.
    Counts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub delta: f64,
    pub max_iter: usize,
    pub mode: EmMode,
    pub init: InitStrategy,
    /// Additive smoothing for transition counts.
    pub smoothing: f64,
    pub q_estimate: QEstimate,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            delta: DEFAULT_DELTA,
            max_iter: DEFAULT_MAX_ITER,
            mode: EmMode::Soft,
            init: InitStrategy::KMeans,
            smoothing: DEFAULT_SMOOTHING,
            q_estimate: QEstimate::Deconvolved,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    /// 0-based state per observation.
    pub labels: Vec<usize>,
    /// Total log-likelihood after each accepted iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Some state ran short of events and was reseeded; the trace restarts
    /// after the last reseed.
    pub reseeded: bool,
    /// Some Beta fit fell back to method-of-moments values.
    pub beta_fallback: bool,
}

/// JSON layout of a fit; labels are 1-based. The model keys match the model
/// file format, so a fit file can be used as a model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub k: usize,
    pub pi: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub jump_laws: Vec<BetaLaw>,
    pub labels: Vec<usize>,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn to_record(&self) -> FitRecord {
        let raw = self.spec.to_raw();
        FitRecord {
            k: raw.k,
            pi: raw.pi,
            q: raw.q,
            lambda: raw.lambda,
            jump_laws: raw.jump_laws,
            labels: self.labels.iter().map(|l| l + 1).collect(),
            loglik_trace: self.loglik_trace.clone(),
            converged: self.converged,
            iterations: self.iterations,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("fit record serializes")
    }

    /// The same fit with states ordered by ascending rate.
    pub fn canonicalize(&self) -> Result<FitResult> {
        let k = self.spec.k();
        let lambda = self.spec.lambda();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
        let mut rank = vec![0; k];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let q = self.spec.q();
        let spec = ModelSpec::new(
            order.iter().map(|&o| self.spec.pi()[o]).collect(),
            order.iter().map(|&a| order.iter().map(|&b| q[(a, b)]).collect()).collect(),
            order.iter().map(|&o| lambda[o]).collect(),
            order.iter().map(|&o| self.spec.jump_laws()[o]).collect(),
        )?;
        Ok(FitResult {
            spec,
            labels: self.labels.iter().map(|&l| rank[l]).collect(),
            ..self.clone()
        })
    }
}

/// Label of each observation: the state with the largest event likelihood,
/// lowest index on ties.
pub fn classify(obs: &Observations, spec: &ModelSpec) -> Vec<usize> {
    let table = LogLikTable::new(obs);
    let logf = table.evaluate(&Params::from_spec(spec));
    logf.chunks(spec.k()).map(argmax).collect()
}

/// Smoothed transition matrix and raw transition counts of a label sequence.
/// Rows without departures (and zero smoothing) become uniform.
pub fn estimate_q(labels: &[usize], k: usize, smoothing: f64) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut counts = vec![vec![0usize; k]; k];
    for w in labels.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let soft: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|&c| c as f64).collect()).collect();
    (normalize_counts(&soft, smoothing), counts)
}

fn normalize_counts(counts: &[Vec<f64>], smoothing: f64) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let k = row.len() as f64;
            let total: f64 = row.iter().sum::<f64>() + k * smoothing;
            if total > 0.0 {
                row.iter().map(|c| (c + smoothing) / total).collect()
            } else {
                vec![1.0 / k; row.len()]
            }
        })
        .collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
struct Params {
    weights: Vec<f64>,
    lambda: Vec<f64>,
    laws: Vec<BetaLaw>,
    beta_fallback: bool,
}

impl Params {
    fn from_spec(spec: &ModelSpec) -> Self {
        Params {
            weights: spec.pi().to_vec(),
            lambda: spec.lambda().to_vec(),
            laws: spec.jump_laws().to_vec(),
            beta_fallback: false,
        }
    }

    /// Weighted MLEs per state from an n×k responsibility table.
    fn fit(obs: &Observations, resp: &[f64], k: usize) -> Result<Self> {
        let n = obs.len();
        let mut p = Params {
            weights: Vec::with_capacity(k),
            lambda: Vec::with_capacity(k),
            laws: Vec::with_capacity(k),
            beta_fallback: false,
        };
        let mut w = vec![0.0; n];
        for i in 0..k {
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = resp[j * k + i];
            }
            p.weights.push(w.iter().sum::<f64>() / n as f64);
            p.lambda.push(fit_exponential_weighted(&obs.x, &w)?);
            let beta = fit_beta_weighted(&obs.y, &w)?;
            p.beta_fallback |= beta.fallback;
            p.laws.push(beta.law);
        }
        Ok(p)
    }
}

/// Per-observation quantities that do not change between iterations.
struct LogLikTable<'a> {
    x: &'a [f64],
    ln_y: Vec<f64>,
    ln_1my: Vec<f64>,
}

impl<'a> LogLikTable<'a> {
    fn new(obs: &'a Observations) -> Self {
        LogLikTable {
            x: &obs.x,
            ln_y: obs.y.iter().map(|y| y.ln()).collect(),
            ln_1my: obs.y.iter().map(|y| (-y).ln_1p()).collect(),
        }
    }

    /// n×k table of log f_i(x_n, y_n).
    fn evaluate(&self, p: &Params) -> Vec<f64> {
        let k = p.lambda.len();
        let consts: Vec<f64> = (0..k)
            .map(|i| p.lambda[i].ln() - statrs::function::beta::ln_beta(p.laws[i].alpha, p.laws[i].beta))
            .collect();
        let mut out = Vec::with_capacity(self.x.len() * k);
        for n in 0..self.x.len() {
            for i in 0..k {
                let law = &p.laws[i];
                out.push(
                    consts[i] - p.lambda[i] * self.x[n]
                        + (law.alpha - 1.0) * self.ln_y[n]
                        + (law.beta - 1.0) * self.ln_1my[n],
                );
            }
        }
        out
    }
}

/// Responsibilities and total log-likelihood for the given mode.
fn e_step(logf: &[f64], p: &Params, mode: EmMode) -> (Vec<f64>, f64) {
    let k = p.lambda.len();
    let mut resp = vec![0.0; logf.len()];
    let mut total = 0.0;
    let ln_w: Vec<f64> = p.weights.iter().map(|w| w.ln()).collect();
    for (row, out) in logf.chunks(k).zip(resp.chunks_mut(k)) {
        match mode {
            EmMode::Hard => {
                let best = argmax(row);
                out[best] = 1.0;
                total += row[best];
            }
            EmMode::Soft => {
                let mut m = f64::NEG_INFINITY;
                for i in 0..k {
                    out[i] = ln_w[i] + row[i];
                    m = m.max(out[i]);
                }
                let mut s = 0.0;
                for v in out.iter_mut() {
                    *v = (*v - m).exp();
                    s += *v;
                }
                for v in out.iter_mut() {
                    *v /= s;
                }
                total += m + s.ln();
            }
        }
    }
    (resp, total)
}

fn one_hot(labels: &[usize], k: usize) -> Vec<f64> {
    let mut resp = vec![0.0; labels.len() * k];
    for (n, &l) in labels.iter().enumerate() {
        resp[n * k + l] = 1.0;
    }
    resp
}

/// Standardized (log x, logit y) features.
fn features(obs: &Observations) -> Vec<[f64; 2]> {
    let raw: Vec<[f64; 2]> = obs
        .x
        .iter()
        .zip(&obs.y)
        .map(|(&x, &y)| [x.max(f64::MIN_POSITIVE).ln(), (y / (1.0 - y)).ln()])
        .collect();
    let n = raw.len() as f64;
    let mut out = raw.clone();
    for d in 0..2 {
        let mean = raw.iter().map(|f| f[d]).sum::<f64>() / n;
        let sd = (raw.iter().map(|f| (f[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for f in out.iter_mut() {
            f[d] = (f[d] - mean) / sd;
        }
    }
    out
}

/// Labels from equal-count chunks of the observations sorted by holding time.
/// The shortest holding times get label 0.
fn quantile_labels(obs: &Observations, k: usize) -> Vec<usize> {
    let n = obs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| obs.x[a].total_cmp(&obs.x[b]));
    let mut labels = vec![0; n];
    for (rank, &idx) in order.iter().enumerate() {
        labels[idx] = rank * k / n;
    }
    labels
}

/// Lloyd iterations seeded from the quantile split; falls back to the split
/// itself when a cluster ends up too small.
fn kmeans_labels(obs: &Observations, k: usize) -> Vec<usize> {
    let start = quantile_labels(obs, k);
    let feats = features(obs);
    let mut labels = start.clone();
    for _ in 0..100 {
        let mut centroids = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (f, &l) in feats.iter().zip(&labels) {
            centroids[l][0] += f[0];
            centroids[l][1] += f[1];
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            break;
        }
        for (c, &m) in centroids.iter_mut().zip(&counts) {
            c[0] /= m as f64;
            c[1] /= m as f64;
        }
        let next: Vec<usize> = feats
            .iter()
            .map(|f| {
                let d: Vec<f64> = centroids.iter().map(|c| -((f[0] - c[0]).powi(2) + (f[1] - c[1]).powi(2))).collect();
                argmax(&d)
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    if counts.iter().any(|&c| c < MIN_PER_STATE) {
        log::debug!("k-means produced a cluster below {MIN_PER_STATE} events; using the quantile split");
        return start;
    }
    labels
}

/// Moves the worst-explained observations into every state whose
/// (effective) size fell below the floor. Returns whether anything moved.
fn reseed(resp: &mut [f64], logf: &[f64], k: usize) -> bool {
    let n = resp.len() / k;
    let mut moved = false;
    for i in 0..k {
        let size: f64 = (0..n).map(|j| resp[j * k + i]).sum();
        if size >= MIN_PER_STATE as f64 {
            continue;
        }
        let mut fit: Vec<(f64, usize)> = (0..n)
            .map(|j| {
                let row = &logf[j * k..(j + 1) * k];
                (row[argmax(row)], j)
            })
            .collect();
        fit.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(_, j) in fit.iter().take(MIN_PER_STATE) {
            let row = &mut resp[j * k..(j + 1) * k];
            row.fill(0.0);
            row[i] = 1.0;
        }
        log::warn!("state {} ran short of events; reseeded from the {MIN_PER_STATE} worst-fitting", i + 1);
        moved = true;
    }
    moved
}

/// Alternating fit of per-state holding-time rates and jump-size laws, state
/// assignments and the transition matrix.
///
/// Returns the best iterate seen. When `max_iter` is reached without the
/// log-likelihood settling within `delta`, the result has `converged = false`.
pub fn em_fit(obs: &Observations, k: usize, opts: &EmOptions) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n = obs.len();
    if n < EVENTS_PER_STATE * k {
        return Err(Error::TooFewEvents {
            got: n,
            k,
            need: EVENTS_PER_STATE * k,
        });
    }
    if !(opts.delta > 0.0) || opts.max_iter == 0 || !(opts.smoothing >= 0.0) {
        return Err(Error::InvalidArgument("delta and max_iter must be positive, smoothing non-negative".into()));
    }
    let labels = match &opts.init {
        InitStrategy::KMeans => kmeans_labels(obs, k),
        InitStrategy::QuantileSplit => quantile_labels(obs, k),
        InitStrategy::Labels(l) => {
            if l.len() != n || l.iter().any(|&s| s >= k) {
                return Err(Error::InvalidArgument("initial labels must be one state in 0..k per observation".into()));
            }
            l.clone()
        }
    };
    let table = LogLikTable::new(obs);
    let mut resp = one_hot(&labels, k);

    let mut trace: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Params, Vec<f64>)> = None;
    let mut converged = false;
    let mut reseeded = false;
    let mut beta_fallback = false;
    let mut iterations = 0;
    for iter in 1..=opts.max_iter {
        iterations = iter;
        let params = Params::fit(obs, &resp, k)?;
        beta_fallback |= params.beta_fallback;
        let logf = table.evaluate(&params);
        let (mut next, ll) = e_step(&logf, &params, opts.mode);
        if !ll.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood at iteration {iter}")));
        }
        if let Some(&prev) = trace.last() {
            if ll < prev {
                // rounding-level loss next to the optimum ends the run
                converged = prev - ll < opts.delta;
                if !converged {
                    log::warn!("log-likelihood fell from {prev} to {ll}; stopping");
                }
                break;
            }
        }
        trace.push(ll);
        if best.as_ref().is_none_or(|b| ll >= b.0) {
            best = Some((ll, params, next.clone()));
        }
        if reseed(&mut next, &logf, k) {
            reseeded = true;
            trace.clear();
            best = None;
            resp = next;
            continue;
        }
        if let [.., a, b] = trace[..] {
            if (b - a).abs() < opts.delta {
                converged = true;
                break;
            }
        }
        resp = next;
    }
    let (_, params, resp) = best.ok_or_else(|| Error::NumericalFault("no iterate was accepted".into()))?;

    let labels: Vec<usize> = resp.chunks(k).map(argmax).collect();
    let mut counts = vec![vec![0.0; k]; k];
    for pair in resp.chunks(k).collect::<Vec<_>>().windows(2) {
        for (i, row) in counts.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c += pair[0][i] * pair[1][j];
            }
        }
    }
    let pair_counts = match opts.q_estimate {
        QEstimate::Counts => counts,
        QEstimate::Deconvolved => deconvolved_counts(&resp, &counts, k).unwrap_or_else(|| {
            log::warn!("state posteriors too entangled to correct transition counts; using raw counts");
            counts
        }),
    };
    let q = normalize_counts(&pair_counts, opts.smoothing);
    let pi: Vec<f64> = (0..k).map(|i| resp.chunks(k).map(|r| r[i]).sum::<f64>() / n as f64).collect();
    let spec = ModelSpec::new(pi, q, params.lambda, params.laws)?;
    if !converged {
        log::warn!("no convergence within {} iterations", opts.max_iter);
    }
    Ok(FitResult {
        spec,
        labels,
        loglik_trace: trace,
        converged,
        iterations,
        reseeded,
        beta_fallback,
    })
}

/// Transition counts corrected for the blur of soft assignments.
///
/// With posteriors r_n, E[Σ r_n r_{n+1}ᵀ] = Mᵀ C M where C holds the true
/// pair counts and M_ai = E[r_i | state a] = E[r_a r_i] / E[r_a].
fn deconvolved_counts(resp: &[f64], counts: &[Vec<f64>], k: usize) -> Option<Vec<Vec<f64>>> {
    let mut g = DMatrix::<f64>::zeros(k, k);
    let mut w = vec![0.0; k];
    for r in resp.chunks(k) {
        for a in 0..k {
            w[a] += r[a];
            for i in 0..k {
                g[(a, i)] += r[a] * r[i];
            }
        }
    }
    let m = DMatrix::from_fn(k, k, |a, i| g[(a, i)] / w[a]);
    let m_inv = m.clone().try_inverse()?;
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    if norm1(&m) * norm1(&m_inv) > 1e8 {
        return None;
    }
    let c = DMatrix::from_fn(k, k, |i, j| counts[i][j]);
    let x = m_inv.transpose() * c * &m_inv;
    Some((0..k).map(|i| (0..k).map(|j| x[(i, j)].max(0.0)).collect()).collect())
}

/// Pairs events into observations, then fits.
pub fn fit_events(events: &[JumpEvent], k: usize, pairing: Pairing, opts: &EmOptions) -> Result<FitResult> {
    em_fit(&events_to_observations(events, pairing)?, k, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit_beta, fit_exponential};
    use crate::model::reference_two_state;
    use crate::simulate::{path_rng, JumpConvention, PathSampler};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn well_separated() -> ModelSpec {
        ModelSpec::new(
            vec![0.5, 0.5],
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            vec![5.0, 0.2],
            vec![BetaLaw::new(2.0, 50.0).unwrap(), BetaLaw::new(5.0, 10.0).unwrap()],
        )
        .unwrap()
    }

    fn draw(spec: &ModelSpec, n: usize, seed: u64) -> (Observations, Vec<usize>) {
        let sampler = PathSampler::new(spec, JumpConvention::Destination).unwrap();
        let seq = sampler.sample_jumps(n + 1, None, &mut path_rng(seed, 0)).unwrap();
        (seq.observations(Pairing::Following).unwrap(), seq.observation_states(Pairing::Following))
    }

    fn is_monotone(trace: &[f64]) -> bool {
        trace.windows(2).all(|w| w[1] >= w[0])
    }

    #[test]
    fn q_from_labels() {
        let (q, counts) = estimate_q(&[0, 1, 0, 1, 0], 2, 0.0);
        assert_eq!(q, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(counts, vec![vec![0, 2], vec![2, 0]]);
        let (q, _) = estimate_q(&[0, 0, 0, 0], 2, 0.5);
        assert!((q[0][0] - 3.5 / 4.0).abs() < 1e-15 && (q[0][1] - 0.5 / 4.0).abs() < 1e-15);
        assert_eq!(q[1], vec![0.5, 0.5]);
        let (q, _) = estimate_q(&[1, 1], 3, 0.0);
        assert_eq!(q[0], vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn q_sampling_oracle() {
        let spec = reference_two_state();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sampler = PathSampler::new(&spec, JumpConvention::Destination).unwrap();
        let seq = sampler.sample_jumps(100_000, None, &mut rng).unwrap();
        let (q, _) = estimate_q(&seq.states, 2, 0.5);
        for i in 0..2 {
            assert!((q[i].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..2 {
                assert!((q[i][j] - spec.q()[(i, j)]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn classify_separates_dominant_states() {
        let spec = ModelSpec::new(
            vec![0.5, 0.5],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![10.0, 0.01],
            vec![BetaLaw::new(2.0, 20.0).unwrap(); 2],
        )
        .unwrap();
        let obs = Observations::new(vec![0.05, 200.0, 0.05, 200.0], vec![0.1, 0.1, 0.2, 0.05]).unwrap();
        let labels = classify(&obs, &spec);
        assert_eq!(labels, vec![0, 1, 0, 1]);
        assert_eq!(classify(&obs, &spec), labels);
        let one = ModelSpec::one_state(1.0, BetaLaw::new(2.0, 20.0).unwrap()).unwrap();
        assert!(classify(&obs, &one).iter().all(|&l| l == 0));
    }

    #[test]
    fn single_state_reduces_to_plain_mles() {
        let (obs, _) = draw(&reference_two_state(), 200, 1);
        for mode in [EmMode::Soft, EmMode::Hard] {
            let fit = em_fit(&obs, 1, &EmOptions { mode, ..Default::default() }).unwrap();
            assert_eq!(fit.spec.lambda()[0], fit_exponential(&obs.x).unwrap());
            assert_eq!(fit.spec.jump_laws()[0], fit_beta(&obs.y).unwrap().law);
            assert_eq!(fit.spec.q()[(0, 0)], 1.0);
            assert!(fit.converged);
            assert!(fit.labels.iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn too_few_events() {
        let (obs, _) = draw(&reference_two_state(), 15, 1);
        assert!(matches!(em_fit(&obs, 2, &EmOptions::default()), Err(Error::TooFewEvents { got: 15, k: 2, need: 20 })));
    }

    #[test]
    fn recovers_well_separated_states() {
        let truth = well_separated();
        for mode in [EmMode::Soft, EmMode::Hard] {
            let (obs, states) = draw(&truth, 3000, 11);
            let fit = em_fit(&obs, 2, &EmOptions { mode, ..Default::default() }).unwrap();
            assert!(fit.converged, "{mode:?}");
            assert!(is_monotone(&fit.loglik_trace));
            let fit = fit.canonicalize().unwrap();
            // canonical order is ascending rate: state 0 is the slow one
            let order = [1, 0];
            for (s, &t) in order.iter().enumerate() {
                let rel = |a: f64, b: f64| (a - b).abs() / b;
                assert!(rel(fit.spec.lambda()[s], truth.lambda()[t]) < 0.1, "{mode:?} {:?}", fit.spec.lambda());
                assert!(rel(fit.spec.jump_laws()[s].mean(), truth.jump_laws()[t].mean()) < 0.1);
                for (u, &v) in order.iter().enumerate() {
                    assert!((fit.spec.q()[(s, u)] - truth.q()[(t, v)]).abs() < 0.1);
                }
            }
            let agree = fit.labels.iter().zip(&states).filter(|(a, b)| order[**a] == **b).count();
            assert!(agree as f64 > 0.9 * states.len() as f64);
        }
    }

    #[test]
    fn permutation_symmetry() {
        let (obs, _) = draw(&reference_two_state(), 1000, 3);
        let init: Vec<usize> = obs.x.iter().map(|&x| usize::from(x > 0.7)).collect();
        let flipped: Vec<usize> = init.iter().map(|l| 1 - l).collect();
        let opts = |l: Vec<usize>| EmOptions {
            init: InitStrategy::Labels(l),
            ..Default::default()
        };
        let a = em_fit(&obs, 2, &opts(init)).unwrap();
        let b = em_fit(&obs, 2, &opts(flipped)).unwrap();
        assert_eq!(a.iterations, b.iterations);
        for (x, y) in a.loglik_trace.iter().zip(&b.loglik_trace) {
            assert!((x - y).abs() < 1e-9 * x.abs());
        }
        assert_eq!(a.labels.iter().map(|l| 1 - l).collect::<Vec<_>>(), b.labels);
        let (a, b) = (a.canonicalize().unwrap(), b.canonicalize().unwrap());
        assert_eq!(a.labels, b.labels);
        for i in 0..2 {
            assert!((a.spec.lambda()[i] - b.spec.lambda()[i]).abs() < 1e-9);
            assert!((a.spec.pi()[i] - b.spec.pi()[i]).abs() < 1e-9);
            for j in 0..2 {
                assert!((a.spec.q()[(i, j)] - b.spec.q()[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fit_json_layout() {
        let (obs, _) = draw(&well_separated(), 300, 2);
        let fit = em_fit(&obs, 2, &EmOptions::default()).unwrap();
        let json = fit.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["pi", "Q", "lambda", "jump_laws", "labels", "loglik_trace", "converged", "iterations"] {
            assert!(value.get(key).is_some(), "{key}");
        }
        let labels = value["labels"].as_array().unwrap();
        assert!(labels.iter().all(|l| matches!(l.as_u64(), Some(1) | Some(2))));
        let reloaded = ModelSpec::from_json(&json).unwrap();
        assert_eq!(reloaded.lambda(), fit.spec.lambda());
        for row in fit.to_record().q {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let (obs, _) = draw(&well_separated(), 100, 2);
        assert!(em_fit(&obs, 0, &EmOptions::default()).is_err());
        let bad = EmOptions {
            init: InitStrategy::Labels(vec![0; 3]),
            ..Default::default()
        };
        assert!(em_fit(&obs, 2, &bad).is_err());
    }
}
