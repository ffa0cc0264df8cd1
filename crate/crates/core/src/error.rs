use thiserror::Error;

/// Errors raised by the spectral toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KreinError {
    /// An input lies outside the domain of the operation (non-positive rate,
    /// `alpha` outside `(0,1)`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A recursion left the representable range of `f64`.
    #[error("numeric range exceeded at index {index}: {detail}")]
    NumericRange { index: usize, detail: String },

    /// The caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The input carries no information to work with (zero mass, no jumps, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A cut point of a restriction coincides with an atom.
    #[error("cut point {position} coincides with an atom")]
    CutCollision { position: f64 },

    /// The string configuration is not supported for the requested boundary condition.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// An iterative numerical method failed to converge.
    #[error("numeric failure at index {index}: {detail}")]
    NumericFailure { index: usize, detail: String },

    /// Two independent computations disagree where they must agree.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, KreinError>;

impl From<serde_json::Error> for KreinError {
    fn from(e: serde_json::Error) -> Self {
        KreinError::Serialization(e.to_string())
    }
}

impl From<csv::Error> for KreinError {
    fn from(e: csv::Error) -> Self {
        KreinError::Serialization(e.to_string())
    }
}
