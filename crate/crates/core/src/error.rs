//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed model or scenario parameters, reported with a field path.
    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    /// Fertility coefficient index outside `0..=n`.
    #[error("coefficient index {index} out of range for order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    /// The operation needs closed-form derivatives the family does not expose.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Truncation tail bound exceeds the quadrature error budget.
    #[error("truncation error: tail bound {bound:e} exceeds budget {budget:e}")]
    Truncation { bound: f64, budget: f64 },

    /// Quadrature or time stepping failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Scalar argument outside its admissible interval.
    #[error("{what} out of range: {value} not in [{lo}, {hi}]")]
    OutOfRange {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The requested value is not attained by the function.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// Total population below the extinction floor; the normalized profile
    /// is undefined.
    #[error("degenerate profile: total population {0:e} is below the extinction floor")]
    DegenerateProfile(f64),

    /// Two trajectories cover different time horizons.
    #[error("trajectory horizons differ: {0} vs {1}")]
    HorizonMismatch(f64, f64),
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
