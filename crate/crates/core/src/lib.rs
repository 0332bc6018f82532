//! Maximum-drawdown records modelled as a piecewise deterministic Markov
//! process.
//!
//! Between jumps the record level `R_t` is constant. Jumps arrive after
//! exponential holding times whose rate depends on a hidden regime driven by
//! a Markov chain, and each jump consumes a Beta-distributed fraction of the
//! remaining headroom `1 − R_t`.
//!
//! - [`model`]: parameterization, validation and the moment-system matrices.
//! - [`analytics`]: exact mean/variance curves (matrix exponential and RK4).
//! - [`simulate`]: sample paths and Monte Carlo ensembles.
//! - [`records`]: drawdowns and record events from price series.
//! - [`estimate`]: fitting the model to observed record events.
//! - [`io`]: CSV and JSON file formats.

pub mod analytics;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod io;
pub mod model;
pub mod records;
pub mod simulate;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{BetaLaw, DerivedMatrices, ModelSpec, RawModel};
