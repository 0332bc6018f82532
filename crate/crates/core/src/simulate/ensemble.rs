#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{path_rng, JumpConvention, PathSampler, SamplePath};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::ModelSpec;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub r0: f64,
    /// Fixed starting regime; drawn from π per path when `None`.
    pub initial_state: Option<usize>,
    /// Evaluation times; the last point is the simulation horizon.
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub convention: JumpConvention,
}

/// Path values on the grid, path-major.
#[derive(Debug, Clone)]
pub struct EnsembleValues {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub p05: Vec<f64>,
    pub p95: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
}

impl EnsembleValues {
    pub fn path(&self, index: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[index * n..(index + 1) * n]
    }

    /// Values of every path at grid point `i`, in path order.
    pub fn column(&self, i: usize) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.n_paths).map(|p| self.values[p * n + i]).collect()
    }

    pub fn fraction_above(&self, i: usize, level: f64) -> f64 {
        let above = self.column(i).iter().filter(|&&v| v > level).count();
        above as f64 / self.n_paths as f64
    }

    pub fn stats(&self) -> EnsembleStats {
        let len = self.grid.len();
        let mut out = EnsembleStats {
            grid: self.grid.to_vec(),
            mean: Vec::with_capacity(len),
            var: Vec::with_capacity(len),
            p05: Vec::with_capacity(len),
            p95: Vec::with_capacity(len),
            n_paths: self.n_paths,
            seed: self.seed,
        };
        let n = self.n_paths as f64;
        for i in 0..len {
            let mut col = self.column(i);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            col.sort_by(f64::total_cmp);
            out.mean.push(mean);
            out.var.push(var);
            out.p05.push(nearest_rank(&col, 0.05));
            out.p95.push(nearest_rank(&col, 0.95));
        }
        out
    }
}

/// Nearest-rank percentile of sorted data: the ⌈p·n⌉-th smallest value.
pub(crate) fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

fn check(cfg: &EnsembleConfig) -> Result<()> {
    if cfg.n_paths < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths, got {}", cfg.n_paths)));
    }
    if !(cfg.grid.last() > 0.0) {
        return Err(Error::InvalidArgument("ensemble grid must extend past t = 0".into()));
    }
    if !(0.0..1.0).contains(&cfg.r0) {
        return Err(Error::BadInitial(cfg.r0));
    }
    Ok(())
}

fn path_values(sampler: &PathSampler, cfg: &EnsembleConfig, index: usize, out: &mut [f64]) -> Result<()> {
    let mut rng = path_rng(cfg.seed, index as u64);
    let path = sampler.sample(cfg.r0, cfg.initial_state, cfg.grid.last(), &mut rng)?;
    path.values_on(&cfg.grid, out);
    Ok(())
}

pub fn simulate_values_sequential(spec: &ModelSpec, cfg: &EnsembleConfig) -> Result<EnsembleValues> {
    check(cfg)?;
    let sampler = PathSampler::new(spec, cfg.convention)?;
    let n = cfg.grid.len();
    let mut values = vec![0.0; n * cfg.n_paths];
    for (index, chunk) in values.chunks_mut(n).enumerate() {
        path_values(&sampler, cfg, index, chunk)?;
    }
    Ok(EnsembleValues {
        grid: cfg.grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        values,
    })
}

/// Same output as [`simulate_values_sequential`], with paths spread over the
/// rayon pool. Each path owns its RNG stream, so scheduling cannot change
/// the result.
#[cfg(feature = "parallel")]
pub fn simulate_values_parallel(spec: &ModelSpec, cfg: &EnsembleConfig) -> Result<EnsembleValues> {
    check(cfg)?;
    let sampler = PathSampler::new(spec, cfg.convention)?;
    let n = cfg.grid.len();
    let mut values = vec![0.0; n * cfg.n_paths];
    values
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(index, chunk)| path_values(&sampler, cfg, index, chunk))?;
    Ok(EnsembleValues {
        grid: cfg.grid.clone(),
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        values,
    })
}

pub fn simulate_values(spec: &ModelSpec, cfg: &EnsembleConfig) -> Result<EnsembleValues> {
    #[cfg(feature = "parallel")]
    {
        simulate_values_parallel(spec, cfg)
    }
    #[cfg(not(feature = "parallel"))]
    {
        simulate_values_sequential(spec, cfg)
    }
}

pub fn monte_carlo(spec: &ModelSpec, cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    Ok(simulate_values(spec, cfg)?.stats())
}

/// The first `count` paths of the ensemble described by `cfg`, using the same
/// per-path streams as [`monte_carlo`].
pub fn sample_paths(spec: &ModelSpec, cfg: &EnsembleConfig, count: usize) -> Result<Vec<SamplePath>> {
    let sampler = PathSampler::new(spec, cfg.convention)?;
    (0..count.min(cfg.n_paths))
        .map(|i| sampler.sample(cfg.r0, cfg.initial_state, cfg.grid.last(), &mut path_rng(cfg.seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_two_state;

    fn config(n_paths: usize, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            r0: 0.0,
            initial_state: None,
            grid: TimeGrid::uniform(50.0, 0.5).unwrap(),
            n_paths,
            seed,
            convention: JumpConvention::Destination,
        }
    }

    #[test]
    fn nearest_rank_percentiles() {
        let data: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&data, 0.05), 5.0);
        assert_eq!(nearest_rank(&data, 0.95), 95.0);
        assert_eq!(nearest_rank(&[3.0, 7.0], 0.05), 3.0);
        assert_eq!(nearest_rank(&[3.0, 7.0], 0.95), 7.0);
        assert_eq!(nearest_rank(&[4.0], 0.5), 4.0);
    }

    #[test]
    fn minimal_ensemble() {
        let stats = monte_carlo(&reference_two_state(), &config(2, 1)).unwrap();
        assert_eq!(stats.mean.len(), 101);
        assert_eq!(stats.mean[0], 0.0);
        assert_eq!(stats.var[0], 0.0);
        assert!(monte_carlo(&reference_two_state(), &config(1, 1)).is_err());
    }

    #[test]
    fn deterministic_and_schedule_independent() {
        let spec = reference_two_state();
        let a = simulate_values_sequential(&spec, &config(500, 42)).unwrap().stats();
        let b = monte_carlo(&spec, &config(500, 42)).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&spec, &config(500, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn band_ordering() {
        let stats = monte_carlo(&reference_two_state(), &config(2000, 5)).unwrap();
        for i in 0..stats.grid.len() {
            assert!(stats.p05[i] <= stats.mean[i] && stats.mean[i] <= stats.p95[i]);
            assert!(stats.var[i] >= 0.0);
        }
    }

    #[test]
    fn exported_paths_match_ensemble_streams() {
        let spec = reference_two_state();
        let cfg = config(20, 3);
        let values = simulate_values(&spec, &cfg).unwrap();
        let paths = sample_paths(&spec, &cfg, 10).unwrap();
        assert_eq!(paths.len(), 10);
        for (i, path) in paths.iter().enumerate() {
            for (t, v) in cfg.grid.iter().zip(values.path(i)) {
                assert_eq!(path.value_at(*t), *v);
            }
        }
    }
}
