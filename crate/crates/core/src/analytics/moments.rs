use nalgebra::{DMatrix, DVector};

use super::expm::matrix_exponential;
use super::rk4::{rk4_integrate, LinearField};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{DerivedMatrices, ModelSpec};

/// Reciprocal condition number below which B is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

pub const DEFAULT_RK4_STEP: f64 = 0.01;

/// Values below this are reported as a numerical fault instead of clamped.
pub const VARIANCE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    MatrixExponential,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    pub rk4_step: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            rk4_step: DEFAULT_RK4_STEP,
        }
    }
}

/// Conditional moments per starting regime, and their mixture over π.
#[derive(Debug, Clone)]
pub struct MomentCurve {
    pub grid: TimeGrid,
    /// k × n, entry (ν, i) is the moment at `grid[i]` when starting in ν.
    pub per_state: DMatrix<f64>,
    pub mixed: Vec<f64>,
    pub initial_r: f64,
    pub method: SolveMethod,
    /// Sup-norm distance to the independent solution route, when computed.
    pub cross_check: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct VarianceCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    /// Single-regime bound 2(1 − r)e^{−λμt}; `None` for k > 1.
    pub bound: Option<Vec<f64>>,
}

fn check_initial(r: f64) -> Result<()> {
    if (0.0..1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::BadInitial(r))
    }
}

fn curve(spec: &ModelSpec, grid: &TimeGrid, r: f64, columns: Vec<DVector<f64>>, method: SolveMethod) -> MomentCurve {
    let k = spec.k();
    let per_state = DMatrix::from_fn(k, grid.len(), |s, i| columns[i][s]);
    let pi = DVector::from_column_slice(spec.pi());
    let mixed = columns.iter().map(|c| pi.dot(c)).collect();
    MomentCurve {
        grid: grid.clone(),
        per_state,
        mixed,
        initial_r: r,
        method,
        cross_check: None,
    }
}

fn sup_distance(a: &MomentCurve, b: &MomentCurve) -> f64 {
    (&a.per_state - &b.per_state).abs().max()
}

/// Inverse of B together with its 1-norm reciprocal condition number.
fn invert_b(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = b.clone().try_inverse().ok_or(Error::SingularB { rcond: 0.0 })?;
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let rcond = 1.0 / (norm1(b) * norm1(&inv));
    if !(rcond >= SINGULAR_RCOND) {
        return Err(Error::SingularB { rcond });
    }
    Ok(inv)
}

/// Mean curve from the closed-form solution
/// `m̄(t) = e^{Bt} r + (e^{Bt} − I) B⁻¹ ΛQμ`.
pub fn mean_curve_expm(spec: &ModelSpec, r: f64, grid: &TimeGrid) -> Result<MomentCurve> {
    check_initial(r)?;
    let d = spec.derive_matrices();
    let k = spec.k();
    let particular = invert_b(&d.b)? * &d.mean_forcing;
    let start = DVector::from_element(k, r);
    let id = DMatrix::<f64>::identity(k, k);
    let columns = grid
        .iter()
        .map(|&t| {
            let e = matrix_exponential(&(&d.b * t))?;
            Ok(&e * &start + (&e - &id) * &particular)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(curve(spec, grid, r, columns, SolveMethod::MatrixExponential))
}

/// Mean curve by RK4 integration of `m̄' = ΛQμ + B m̄`, `m̄(0) = r·1`.
pub fn mean_curve_rk4(spec: &ModelSpec, r: f64, grid: &TimeGrid, step: f64) -> Result<MomentCurve> {
    check_initial(r)?;
    let d = spec.derive_matrices();
    let field = LinearField::new(d.b.clone(), d.mean_forcing.clone())?;
    let traj = rk4_integrate(&field, &vec![r; spec.k()], grid, step)?;
    let columns = traj.into_iter().map(DVector::from_vec).collect();
    Ok(curve(spec, grid, r, columns, SolveMethod::Rk4))
}

pub fn mean_curve(spec: &ModelSpec, r: f64, grid: &TimeGrid) -> Result<MomentCurve> {
    mean_curve_with(spec, r, grid, &MomentOptions::default())
}

/// Mean curve by both routes: the closed form is returned with its distance
/// to RK4 in `cross_check`. A near-singular B falls back to RK4 alone.
pub fn mean_curve_with(spec: &ModelSpec, r: f64, grid: &TimeGrid, opts: &MomentOptions) -> Result<MomentCurve> {
    let rk4 = mean_curve_rk4(spec, r, grid, opts.rk4_step)?;
    match mean_curve_expm(spec, r, grid) {
        Ok(mut exact) => {
            exact.cross_check = Some(sup_distance(&exact, &rk4));
            Ok(exact)
        }
        Err(Error::SingularB { rcond }) => {
            log::warn!("B is near-singular (rcond {rcond:e}); mean curve from RK4 only");
            Ok(rk4)
        }
        Err(e) => Err(e),
    }
}

/// Joint affine system for z = (m̄, m̄₂):
/// `m̄' = ΛQμ + B m̄`, `m̄₂' = ΛQμ₂ + K m̄ + H m̄₂`.
fn joint_field(d: &DerivedMatrices, k: usize) -> Result<LinearField> {
    let mut a = DMatrix::zeros(2 * k, 2 * k);
    a.view_mut((0, 0), (k, k)).copy_from(&d.b);
    a.view_mut((k, 0), (k, k)).copy_from(&d.k);
    a.view_mut((k, k), (k, k)).copy_from(&d.h);
    let mut c = DVector::zeros(2 * k);
    c.rows_mut(0, k).copy_from(&d.mean_forcing);
    c.rows_mut(k, k).copy_from(&d.second_forcing);
    LinearField::new(a, c)
}

/// First and second moment curves by RK4 on the joint system.
pub fn moment_curves_rk4(spec: &ModelSpec, r: f64, grid: &TimeGrid, step: f64) -> Result<(MomentCurve, MomentCurve)> {
    check_initial(r)?;
    let k = spec.k();
    let d = spec.derive_matrices();
    let field = joint_field(&d, k)?;
    let mut z0 = vec![r; k];
    z0.extend(std::iter::repeat_n(r * r, k));
    let traj = rk4_integrate(&field, &z0, grid, step)?;
    let (mean, second): (Vec<_>, Vec<_>) = traj
        .iter()
        .map(|z| (DVector::from_column_slice(&z[..k]), DVector::from_column_slice(&z[k..])))
        .unzip();
    Ok((
        curve(spec, grid, r, mean, SolveMethod::Rk4),
        curve(spec, grid, r, second, SolveMethod::Rk4),
    ))
}

/// First and second moment curves from the exponential of the augmented
/// (2k+1)-dimensional homogeneous system; needs no inverse of B or H.
pub fn moment_curves_expm(spec: &ModelSpec, r: f64, grid: &TimeGrid) -> Result<(MomentCurve, MomentCurve)> {
    check_initial(r)?;
    let k = spec.k();
    let d = spec.derive_matrices();
    let n = 2 * k + 1;
    let mut aug = DMatrix::zeros(n, n);
    aug.view_mut((0, 0), (k, k)).copy_from(&d.b);
    aug.view_mut((k, 0), (k, k)).copy_from(&d.k);
    aug.view_mut((k, k), (k, k)).copy_from(&d.h);
    aug.view_mut((0, 2 * k), (k, 1)).copy_from(&d.mean_forcing);
    aug.view_mut((k, 2 * k), (k, 1)).copy_from(&d.second_forcing);
    let mut z0 = DVector::from_element(n, r);
    z0.rows_mut(k, k).fill(r * r);
    z0[2 * k] = 1.0;

    let mut mean = Vec::with_capacity(grid.len());
    let mut second = Vec::with_capacity(grid.len());
    for &t in grid.iter() {
        let z = matrix_exponential(&(&aug * t))? * &z0;
        mean.push(z.rows(0, k).into_owned());
        second.push(z.rows(k, k).into_owned());
    }
    Ok((
        curve(spec, grid, r, mean, SolveMethod::MatrixExponential),
        curve(spec, grid, r, second, SolveMethod::MatrixExponential),
    ))
}

/// Second raw moment curve by RK4, cross-checked against the augmented
/// exponential route.
pub fn second_moment_curve(spec: &ModelSpec, r: f64, grid: &TimeGrid, opts: &MomentOptions) -> Result<MomentCurve> {
    let (_, mut second) = moment_curves_rk4(spec, r, grid, opts.rk4_step)?;
    let (_, exact) = moment_curves_expm(spec, r, grid)?;
    second.cross_check = Some(sup_distance(&second, &exact));
    Ok(second)
}

/// `Var(R_t) = π·m̄₂ − (π·m̄)²`, clamped at 0 within [`VARIANCE_FLOOR`].
pub fn variance_from_moments(mean: &MomentCurve, second: &MomentCurve) -> Result<Vec<f64>> {
    if mean.mixed.len() != second.mixed.len() {
        return Err(Error::DimensionMismatch("moment curves on different grids".into()));
    }
    mean.mixed
        .iter()
        .zip(&second.mixed)
        .zip(mean.grid.iter())
        .map(|((&m, &m2), &t)| {
            let v = m2 - m * m;
            if v < VARIANCE_FLOOR || !v.is_finite() {
                Err(Error::NumericalFault(format!("variance {v:e} at t = {t}")))
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect()
}

pub fn variance_curve(spec: &ModelSpec, r: f64, grid: &TimeGrid, opts: &MomentOptions) -> Result<VarianceCurve> {
    let (mean, second) = moment_curves_rk4(spec, r, grid, opts.rk4_step)?;
    let values = variance_from_moments(&mean, &second)?;
    let bound = (spec.k() == 1).then(|| {
        let rate = spec.lambda()[0] * spec.jump_laws()[0].mean();
        grid.iter().map(|&t| 2.0 * (1.0 - r) * (-rate * t).exp()).collect()
    });
    Ok(VarianceCurve {
        grid: grid.clone(),
        values,
        bound,
    })
}
