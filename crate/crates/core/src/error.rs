use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("unsupported regime: gamma = {gamma} (only the underdamped branch 0 < gamma < 1 is modelled)")]
    UnsupportedRegime { gamma: f64 },

    #[error("quadrature did not converge: achieved relative error {achieved:.3e} (requested {requested:.3e})")]
    QuadratureDiverged { achieved: f64, requested: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("orbit escaped at kick {kick}")]
    Escaped { kick: usize },

    #[error("no crossing in bracket [{lo}, {hi}]: {detail}")]
    NoCrossing { lo: f64, hi: f64, detail: String },

    #[error("scaling undefined: {0}")]
    ScalingUndefined(String),

    #[error("reconstruction undefined: {0}")]
    Reconstruction(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
