use thiserror::Error;

/// Errors raised by the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid velocity model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("direction is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("quadrature for {what} did not converge after {levels} levels")]
    QuadratureNotConverged { what: &'static str, levels: usize },

    #[error("root not bracketed on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    RootNotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("outside the domain of validity: {0}")]
    Domain(String),

    #[error("time step {dt} violates the CFL bound {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error("front left the computational domain at t = {time}")]
    FrontLeftDomain { time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
