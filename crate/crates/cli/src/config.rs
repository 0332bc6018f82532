use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use mdd_pdmp::estimate::{EmMode, QEstimate};
use mdd_pdmp::records::Pairing;
use mdd_pdmp::simulate::JumpConvention;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_HORIZON: f64 = 50.0;
pub const DEFAULT_STEP: f64 = 0.5;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_K: usize = 2;
pub const DEFAULT_BASE_PRICE: f64 = 100.0;
pub const DEFAULT_TIME_UNIT: &str = "days";
/// Raw paths written by `--paths`.
pub const MAX_EXPORTED_PATHS: usize = 10;

/// Values read from `--config`. Every key is optional; command-line flags
/// take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub paths: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub mean_curve: Option<PathBuf>,
    pub variance_curve: Option<PathBuf>,
    pub r0: Option<f64>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub rk4_step: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub max_iter: Option<usize>,
    pub k: Option<usize>,
    pub smoothing: Option<f64>,
    pub mode: Option<EmMode>,
    pub pairing: Option<Pairing>,
    pub q_estimate: Option<QEstimate>,
    pub convention: Option<JumpConvention>,
    pub initial_state: Option<usize>,
    pub calendar_days: Option<bool>,
    pub time_unit: Option<String>,
    pub base_price: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag value, else config value, else default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Like [`pick`] for values without a default.
pub fn require<T>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    flag.or(config).with_context(|| format!("missing required value --{name} (flag or config key)"))
}
