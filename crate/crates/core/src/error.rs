use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised by the numerical checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite state: {0}")]
    NonFinite(String),

    #[error("family is not the identity at s = 0 (defect {defect:e})")]
    NotAGroupAtZero { defect: f64 },

    #[error("contracted covector is not closed (asymmetry {asymmetry:e})")]
    NotClosed { asymmetry: f64 },

    #[error("map is not canonical: {0}")]
    NotCanonical(String),

    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),

    #[error("Newton iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    /// True for errors caused by evaluating outside a function's domain or
    /// leaving the finite reals.
    pub fn is_numeric_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::NonFinite(_))
    }
}
