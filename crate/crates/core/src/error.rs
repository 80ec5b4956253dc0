use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model data: {0}")]
    InvalidData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} is not a jumping number of the data (no relevant divisor)")]
    NotAJump(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integrand not integrable along coordinate {coord}: {reason}")]
    NotIntegrable { coord: usize, reason: String },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("extrapolation refused: {0}")]
    Extrapolation(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("positivity violated: {0}")]
    Positivity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
