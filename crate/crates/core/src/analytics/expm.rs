use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    if m.is_empty() {
        return Ok(m.clone());
    }
    let out = m.clone().exp();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix exponential overflowed".into()));
    }
    Ok(out)
}
