//! Parameterization of the record process and the matrices derived from it.
//!
//! A [`ModelSpec`] bundles the embedded chain (initial law and transition
//! matrix), the per-state exponential holding rates and the per-state Beta
//! laws of the normalized jump size. [`DerivedMatrices`] holds the drift
//! matrices of the first- and second-moment ODE systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};

/// Tolerance on probability-vector sums.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Beta law of the normalized jump size ρ on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaLaw {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let law = BetaLaw { alpha, beta };
        law.check(0)?;
        Ok(law)
    }

    fn check(&self, state: usize) -> Result<()> {
        if self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::BadShape {
                state,
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    /// First raw moment α/(α+β).
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Second raw moment α(α+1)/((α+β)(α+β+1)).
    pub fn second_moment(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * (self.alpha + 1.0) / (s * (s + 1.0))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    /// Log density at `x`; `-inf` outside (0, 1).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return f64::NEG_INFINITY;
        }
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p() - ln_beta(self.alpha, self.beta)
    }
}

/// Model description as it appears in JSON model files.
///
/// Extra keys are ignored so a fit result file can be fed back in as a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawModel {
    pub k: usize,
    pub pi: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub jump_laws: Vec<BetaLaw>,
}

/// Validated model of the record process with `k` regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pi: Vec<f64>,
    q: DMatrix<f64>,
    lambda: Vec<f64>,
    jump_laws: Vec<BetaLaw>,
}

fn check_probability_vector(v: &[f64]) -> std::result::Result<(), f64> {
    let sum: f64 = v.iter().sum();
    let in_range = v.iter().all(|&p| (0.0..=1.0).contains(&p));
    if in_range && (sum - 1.0).abs() <= PROBABILITY_TOLERANCE {
        Ok(())
    } else {
        Err(sum)
    }
}

/// Checks a raw model description and builds a [`ModelSpec`].
pub fn validate(raw: &RawModel) -> Result<ModelSpec> {
    let k = raw.k;
    if k == 0 {
        return Err(Error::DimensionMismatch("k must be at least 1".into()));
    }
    if raw.pi.len() != k {
        return Err(Error::DimensionMismatch(format!("pi has {} entries, k = {k}", raw.pi.len())));
    }
    if raw.lambda.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "lambda has {} entries, k = {k}",
            raw.lambda.len()
        )));
    }
    if raw.jump_laws.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "jump_laws has {} entries, k = {k}",
            raw.jump_laws.len()
        )));
    }
    if raw.q.len() != k || raw.q.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch(format!("Q must be {k}x{k}")));
    }
    for (row, values) in raw.q.iter().enumerate() {
        check_probability_vector(values).map_err(|sum| Error::NonStochasticRow { row, sum })?;
    }
    check_probability_vector(&raw.pi).map_err(|sum| Error::BadProbabilityVector { sum })?;
    for (state, &value) in raw.lambda.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveRate { state, value });
        }
    }
    for (state, law) in raw.jump_laws.iter().enumerate() {
        law.check(state)?;
    }
    Ok(ModelSpec {
        pi: raw.pi.clone(),
        q: DMatrix::from_fn(k, k, |i, j| raw.q[i][j]),
        lambda: raw.lambda.clone(),
        jump_laws: raw.jump_laws.clone(),
    })
}

impl ModelSpec {
    pub fn new(pi: Vec<f64>, q: Vec<Vec<f64>>, lambda: Vec<f64>, jump_laws: Vec<BetaLaw>) -> Result<Self> {
        validate(&RawModel {
            k: pi.len(),
            pi,
            q,
            lambda,
            jump_laws,
        })
    }

    /// Single-regime model: the chain never leaves its state.
    pub fn one_state(lambda: f64, law: BetaLaw) -> Result<Self> {
        Self::new(vec![1.0], vec![vec![1.0]], vec![lambda], vec![law])
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn jump_laws(&self) -> &[BetaLaw] {
        &self.jump_laws
    }

    /// Same model started from a different initial law.
    pub fn with_initial_law(&self, pi: Vec<f64>) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.pi = pi;
        validate(&raw)
    }

    pub fn to_raw(&self) -> RawModel {
        let k = self.k();
        RawModel {
            k,
            pi: self.pi.clone(),
            q: (0..k).map(|i| (0..k).map(|j| self.q[(i, j)]).collect()).collect(),
            lambda: self.lambda.clone(),
            jump_laws: self.jump_laws.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<model>".into(),
            source,
        })?;
        validate(&raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("model serializes")
    }

    pub fn derive_matrices(&self) -> DerivedMatrices {
        derive_matrices(self)
    }
}

/// Matrices of the moment ODE systems.
///
/// `b` drives the mean (`m' = ΛQμ + B m`), `h` and `k` drive the second
/// moment (`m₂' = ΛQμ₂ + K m + H m₂`), and `a` is the generator of the
/// regime process.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMatrices {
    pub lambda: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub mu2: DVector<f64>,
    /// ΛQμ, the constant forcing of the mean system.
    pub mean_forcing: DVector<f64>,
    /// ΛQμ₂, the constant forcing of the second-moment system.
    pub second_forcing: DVector<f64>,
}

pub fn derive_matrices(spec: &ModelSpec) -> DerivedMatrices {
    let n = spec.k();
    let q = spec.q();
    let mu = DVector::from_iterator(n, spec.jump_laws().iter().map(BetaLaw::mean));
    let mu2 = DVector::from_iterator(n, spec.jump_laws().iter().map(BetaLaw::second_moment));
    let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(spec.lambda()));
    let m = DMatrix::from_diagonal(&mu);
    let m2 = DMatrix::from_diagonal(&mu2);
    let id = DMatrix::<f64>::identity(n, n);

    let a = DMatrix::from_fn(n, n, |i, j| {
        let rate = spec.lambda()[i];
        if i == j {
            -rate * (1.0 - q[(i, i)])
        } else {
            rate * q[(i, j)]
        }
    });
    let lq = &lambda * q;
    let b = &lq * (&id - &m) - &lambda;
    let h = &lq * (&id - &m * 2.0 + &m2) - &lambda;
    let k = &lq * (&m - &m2) * 2.0;
    let mean_forcing = &lq * &mu;
    let second_forcing = &lq * &mu2;

    DerivedMatrices {
        lambda,
        m,
        m2,
        a,
        b,
        h,
        k,
        mu,
        mu2,
        mean_forcing,
        second_forcing,
    }
}

/// Two-regime example model: Exponential(2)/Exponential(1) holding times,
/// Beta(2,20)/Beta(2,30) jump sizes, Q = [[0.6,0.4],[0.5,0.5]], uniform start.
pub fn reference_two_state() -> ModelSpec {
    ModelSpec::new(
        vec![0.5, 0.5],
        vec![vec![0.6, 0.4], vec![0.5, 0.5]],
        vec![2.0, 1.0],
        vec![
            BetaLaw { alpha: 2.0, beta: 20.0 },
            BetaLaw { alpha: 2.0, beta: 30.0 },
        ],
    )
    .expect("reference model is valid")
}
