use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has nonzero mean (|mean coefficient| = {0:.3e})")]
    NonZeroMean(f64),

    #[error("wavenumber enumeration overflow: {0}")]
    EnumerationOverflow(String),

    #[error("1-d maximization did not converge within the iteration budget")]
    MaximizationDidNotConverge,

    #[error("cutoff-doubling agreement {observed:.3e} exceeds tolerance {tolerance:.3e}")]
    NotConverged { observed: f64, tolerance: f64 },

    #[error("solution blew up at t = {t:.6} (non-finite or > {threshold:.1e} coefficient)")]
    Blowup { t: f64, threshold: f64 },

    #[error("requested mode count {requested} exceeds enumerated spectrum size {available}")]
    ModeCountExceedsSpectrum { requested: usize, available: usize },

    #[error("node layout invalid: {0}")]
    InvalidNodeLayout(String),

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("no candidate in the search range converged")]
    NoThresholdInRange,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
