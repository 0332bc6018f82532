//! Mean and variance curves of the record process.
//!
//! Two independent routes are provided for each curve: closed forms built on
//! the matrix exponential, and fixed-step RK4 integration of the linear
//! moment ODE systems.

mod expm;
pub mod moments;
pub mod one_state;
mod rk4;

pub use expm::matrix_exponential;
pub use moments::{
    mean_curve, mean_curve_expm, mean_curve_rk4, mean_curve_with, moment_curves_expm, moment_curves_rk4,
    second_moment_curve, variance_curve, variance_from_moments, MomentCurve, MomentOptions, SolveMethod,
    VarianceCurve, DEFAULT_RK4_STEP,
};
pub use one_state::{one_state_mean, one_state_second_moment, one_state_variance, one_state_variance_bound};
pub use rk4::{rk4_integrate, FnField, LinearField, VectorField};
