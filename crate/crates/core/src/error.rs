use thiserror::Error;

/// Errors produced by the statistics, density and detection routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A data column has zero sample variance, so its correlations are undefined.
    #[error("column {column} has zero sample variance")]
    ZeroVariance { column: usize },

    /// Data contains NaN or infinite entries.
    #[error("non-finite entry at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    /// Argument outside the support of a function.
    #[error("{what}: argument {value} outside domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The density diverges at this point.
    #[error("density diverges at rho = 1 for n = {n} (exponent (n-4)/2 < 0)")]
    DivergentDensity { n: usize },

    /// All transformed statistics are zero; the rate estimate is unbounded.
    #[error("maximum-likelihood estimate is infinite (sum of transformed statistics is zero)")]
    InfiniteEstimate,

    /// Covariance matrix failed Cholesky factorization.
    #[error("covariance is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
