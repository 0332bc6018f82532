use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Right-hand side of `y' = f(t, y)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Time-autonomous affine field `y' = offset + matrix · y`.
#[derive(Debug, Clone)]
pub struct LinearField {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl LinearField {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.len() {
            return Err(Error::DimensionMismatch(format!(
                "linear field: matrix {}x{}, offset {}",
                matrix.nrows(),
                matrix.ncols(),
                offset.len()
            )));
        }
        Ok(LinearField { matrix, offset })
    }

    pub fn homogeneous(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.offset[i];
            for j in 0..n {
                acc += self.matrix[(i, j)] * y[j];
            }
            dy[i] = acc;
        }
    }
}

/// Wraps a closure `(t, y, dy)` as a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

/// Classic four-stage Runge–Kutta integration, reporting the state at every
/// grid point.
///
/// Each gap between consecutive grid points is covered by the smallest number
/// of equal substeps no longer than `step`, so no interpolation is needed.
pub fn rk4_integrate<F: VectorField + ?Sized>(
    field: &F,
    y0: &[f64],
    grid: &TimeGrid,
    step: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("RK4 step must be positive, got {step}")));
    }
    let n = field.dim();
    if y0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial vector has {} entries, field has dimension {n}",
            y0.len()
        )));
    }
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    let mut out = Vec::with_capacity(grid.len());
    out.push(y.clone());
    for w in grid.windows(2) {
        let (start, end) = (w[0], w[1]);
        let substeps = ((end - start) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (end - start) / substeps as f64;
        for s in 0..substeps {
            let t = start + s as f64 * h;
            field.eval(t, &y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k1[i];
            }
            field.eval(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * h * k2[i];
            }
            field.eval(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + h * k3[i];
            }
            field.eval(t + h, &tmp, &mut k4);
            for i in 0..n {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("RK4 state blew up before t = {end}")));
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::matrix_exponential;
    use crate::model::reference_two_state;

    #[test]
    fn zero_field_is_constant() {
        let field = FnField::new(2, |_, _, dy: &mut [f64]| dy.fill(0.0));
        let grid = TimeGrid::uniform(3.0, 0.5).unwrap();
        let traj = rk4_integrate(&field, &[1.5, -2.0], &grid, 0.01).unwrap();
        assert!(traj.iter().all(|y| y == &[1.5, -2.0]));
    }

    #[test]
    fn exponential_decay() {
        let field = FnField::new(1, |_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0]);
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let traj = rk4_integrate(&field, &[1.0], &grid, 0.01).unwrap();
        assert!((traj[1][0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn fourth_order_convergence() {
        let field = FnField::new(1, |t, y: &[f64], dy: &mut [f64]| dy[0] = t.cos() * y[0]);
        let grid = TimeGrid::new(vec![0.0, 2.0]).unwrap();
        let exact = 2.0f64.sin().exp();
        let e1 = (rk4_integrate(&field, &[1.0], &grid, 0.1).unwrap()[1][0] - exact).abs();
        let e2 = (rk4_integrate(&field, &[1.0], &grid, 0.05).unwrap()[1][0] - exact).abs();
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
    }

    #[test]
    fn matches_expm_for_reference_b() {
        let b = reference_two_state().derive_matrices().b;
        let field = LinearField::homogeneous(b.clone()).unwrap();
        let grid = TimeGrid::new(vec![0.0, 5.0]).unwrap();
        let y0 = [0.3, 0.7];
        let traj = rk4_integrate(&field, &y0, &grid, 0.01).unwrap();
        let exact = matrix_exponential(&(b * 5.0)).unwrap() * DVector::from_column_slice(&y0);
        for i in 0..2 {
            assert!((traj[1][i] - exact[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn detects_blow_up() {
        let field = FnField::new(1, |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0]);
        let grid = TimeGrid::new(vec![0.0, 10.0]).unwrap();
        assert!(matches!(
            rk4_integrate(&field, &[1.0], &grid, 0.01),
            Err(Error::NonFinite(_))
        ));
    }
}
