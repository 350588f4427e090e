use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A covariance matrix violates the uncertainty principle.
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Parameters put the system outside its stable regime.
    #[error("unstable parameters: {0}")]
    Instability(String),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("conflicting squeeze specification: {0}")]
    SpecConflict(String),
}

impl Error {
    /// True for failures raised by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_) | Error::Stiffness { .. } | Error::Consistency(_))
    }
}
