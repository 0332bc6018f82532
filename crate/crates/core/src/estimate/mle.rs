use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::model::BetaLaw;

const SCORE_TOLERANCE: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;

/// Outcome of a Beta fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFit {
    pub law: BetaLaw,
    pub iterations: usize,
    /// Newton did not converge and the method-of-moments values were kept.
    pub fallback: bool,
}

/// ψ'(x) for x > 0: upward recurrence to x ≥ 10, then the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    acc + 1.0 / x + z / 2.0 + z / x * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * 5.0 / 66.0))))
}

pub fn fit_exponential(samples: &[f64]) -> Result<f64> {
    fit_exponential_weighted(samples, &vec![1.0; samples.len()])
}

/// Weighted rate MLE Σw / Σwx.
pub fn fit_exponential_weighted(samples: &[f64], weights: &[f64]) -> Result<f64> {
    check_weights(samples.len(), weights)?;
    if let Some(&x) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::NonPositiveSample(x));
    }
    let w: f64 = weights.iter().sum();
    let wx: f64 = samples.iter().zip(weights).map(|(x, w)| x * w).sum();
    Ok(w / wx)
}

/// Sufficient statistics of a (weighted) sample on (0, 1).
#[derive(Debug, Clone, Copy)]
struct BetaStats {
    mean_ln: f64,
    mean_ln1m: f64,
    mean: f64,
    var: f64,
}

impl BetaStats {
    fn new(y: &[f64], w: &[f64]) -> Result<Self> {
        check_weights(y.len(), w)?;
        if let Some(&v) = y.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::OutOfRange(v));
        }
        let total: f64 = w.iter().sum();
        let mut s = BetaStats {
            mean_ln: 0.0,
            mean_ln1m: 0.0,
            mean: 0.0,
            var: 0.0,
        };
        for (&v, &wi) in y.iter().zip(w) {
            s.mean_ln += wi * v.ln();
            s.mean_ln1m += wi * (-v).ln_1p();
            s.mean += wi * v;
        }
        s.mean_ln /= total;
        s.mean_ln1m /= total;
        s.mean /= total;
        s.var = y.iter().zip(w).map(|(v, wi)| wi * (v - s.mean) * (v - s.mean)).sum::<f64>() / total;
        if !(s.var > 0.0) {
            return Err(Error::DegenerateSample);
        }
        Ok(s)
    }

    fn loglik(&self, a: f64, b: f64) -> f64 {
        (a - 1.0) * self.mean_ln + (b - 1.0) * self.mean_ln1m - ln_beta(a, b)
    }

    fn moments(&self) -> (f64, f64) {
        let c = (self.mean * (1.0 - self.mean) / self.var - 1.0).max(1e-3);
        (self.mean * c, (1.0 - self.mean) * c)
    }
}

fn check_weights(n: usize, w: &[f64]) -> Result<()> {
    if w.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} samples", w.len())));
    }
    if n == 0 || !(w.iter().sum::<f64>() > 0.0) {
        return Err(Error::EmptySample);
    }
    if w.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    Ok(())
}

/// Method-of-moments Beta law (population variance).
pub fn beta_method_of_moments(samples: &[f64]) -> Result<BetaLaw> {
    let (a, b) = BetaStats::new(samples, &vec![1.0; samples.len()])?.moments();
    BetaLaw::new(a, b)
}

pub fn fit_beta(samples: &[f64]) -> Result<BetaFit> {
    fit_beta_weighted(samples, &vec![1.0; samples.len()])
}

/// Beta MLE by Newton's method on the digamma score equations
/// ψ(α) − ψ(α+β) = mean ln y, ψ(β) − ψ(α+β) = mean ln(1−y),
/// started from the method of moments, with step halving to stay in the
/// positive quadrant and never lose likelihood.
pub fn fit_beta_weighted(samples: &[f64], weights: &[f64]) -> Result<BetaFit> {
    let stats = BetaStats::new(samples, weights)?;
    let (a0, b0) = stats.moments();
    let (mut a, mut b) = (a0, b0);
    let mut ll = stats.loglik(a, b);
    let done = |a: f64, b: f64, iterations: usize| -> Result<BetaFit> {
        Ok(BetaFit {
            law: BetaLaw::new(a, b)?,
            iterations,
            fallback: false,
        })
    };
    for iter in 0..NEWTON_MAX_ITER {
        let psi_ab = digamma(a + b);
        let ga = stats.mean_ln - digamma(a) + psi_ab;
        let gb = stats.mean_ln1m - digamma(b) + psi_ab;
        let score = ga.abs().max(gb.abs());
        if score < SCORE_TOLERANCE {
            return done(a, b, iter);
        }
        // Hessian of the mean log-likelihood, negative definite
        let t_ab = trigamma(a + b);
        let haa = t_ab - trigamma(a);
        let hbb = t_ab - trigamma(b);
        let hab = t_ab;
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        // the score has hit the rounding floor of the digamma evaluations
        if (da / a).abs().max((db / b).abs()) < 1e-13 {
            return done(a, b, iter);
        }
        // likelihood values carry rounding noise from ln Γ
        let slack = 1e-13 * (1.0 + ll.abs());
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            if na > 0.0 && nb > 0.0 {
                let nll = stats.loglik(na, nb);
                if nll >= ll - slack {
                    a = na;
                    b = nb;
                    ll = ll.max(nll);
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            if score < 1e-6 {
                return done(a, b, iter);
            }
            break;
        }
    }
    log::debug!("beta Newton did not converge; keeping method-of-moments values");
    Ok(BetaFit {
        law: BetaLaw::new(a0, b0)?,
        iterations: NEWTON_MAX_ITER,
        fallback: true,
    })
}

/// Log of the exponential density of the holding time times the Beta density
/// of the jump size.
pub fn event_loglik(holding: f64, rho: f64, rate: f64, law: &BetaLaw) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::OutOfRange(rho));
    }
    if !(holding >= 0.0 && holding.is_finite()) {
        return Err(Error::NonPositiveSample(holding));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::NonPositiveRate { state: 0, value: rate });
    }
    Ok(rate.ln() - rate * holding + law.ln_pdf(rho))
}
