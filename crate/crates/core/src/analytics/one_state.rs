//! Closed forms for a single regime (k = 1).
//!
//! With holding rate λ, jump moments μ = E[ρ], μ₂ = E[ρ²] and start r:
//!
//! ```text
//! m(t)  = 1 − (1 − r) e^{−λμt}
//! m₂(t) = (a+b)/c − b(1−r)/(c−λμ) e^{−λμt} + (r² − (a+b)/c + b(1−r)/(c−λμ)) e^{−ct}
//! ```
//!
//! where a = λμ₂, b = 2λ(μ − μ₂), c = λ(2μ − μ₂). Setting λ = 1 gives the
//! rate-free forms.

use crate::error::{Error, Result};

fn check(lambda: f64, mu: f64, r: f64, t: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonPositiveRate { state: 0, value: lambda });
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidArgument(format!("jump mean must lie in (0, 1), got {mu}")));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(Error::BadInitial(r));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

pub fn one_state_mean(lambda: f64, mu: f64, r: f64, t: f64) -> Result<f64> {
    check(lambda, mu, r, t)?;
    Ok(1.0 - (1.0 - r) * (-lambda * mu * t).exp())
}

pub fn one_state_second_moment(lambda: f64, mu: f64, mu2: f64, r: f64, t: f64) -> Result<f64> {
    check(lambda, mu, r, t)?;
    if !(mu2 > 0.0 && mu2 < mu) {
        return Err(Error::InvalidArgument(format!(
            "second jump moment must lie in (0, {mu}), got {mu2}"
        )));
    }
    let a = lambda * mu2;
    let b = 2.0 * lambda * (mu - mu2);
    let c = lambda * (2.0 * mu - mu2);
    let p = lambda * mu;
    let steady = (a + b) / c;
    let slow = b * (1.0 - r) / (c - p);
    Ok(steady - slow * (-p * t).exp() + (r * r - steady + slow) * (-c * t).exp())
}

pub fn one_state_variance(lambda: f64, mu: f64, mu2: f64, r: f64, t: f64) -> Result<f64> {
    let m = one_state_mean(lambda, mu, r, t)?;
    Ok(one_state_second_moment(lambda, mu, mu2, r, t)? - m * m)
}

/// Upper bound 2(1 − r) e^{−λμt} on the single-regime variance.
pub fn one_state_variance_bound(lambda: f64, mu: f64, r: f64, t: f64) -> Result<f64> {
    check(lambda, mu, r, t)?;
    Ok(2.0 * (1.0 - r) * (-lambda * mu * t).exp())
}
