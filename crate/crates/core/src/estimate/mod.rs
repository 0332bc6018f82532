//! Parameter estimation from observed jumps: per-state exponential holding
//! rates and Beta jump laws by maximum likelihood, state assignment by
//! per-event likelihood, and the transition matrix from successive states.

mod em;
mod mle;

pub use em::{
    classify, em_fit, estimate_q, fit_events, EmMode, EmOptions, FitRecord, FitResult, InitStrategy, QEstimate, DEFAULT_DELTA,
    DEFAULT_MAX_ITER, DEFAULT_SMOOTHING, EVENTS_PER_STATE, MIN_PER_STATE,
};
pub use mle::{
    beta_method_of_moments, event_loglik, fit_beta, fit_beta_weighted, fit_exponential, fit_exponential_weighted,
    trigamma, BetaFit,
};
