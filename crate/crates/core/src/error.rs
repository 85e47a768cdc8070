//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the algebra, calculus, engine and pairing layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("too many exterior generators: {0} (at most 8 are supported)")]
    TooManyGenerators(usize),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("eigen-decomposition did not converge")]
    EigenFailure,
    #[error("finite-difference stencil leaves the chart domain at {0:?}")]
    OutsideChart(Vec<f64>),
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("point lies in the critical set: {0}")]
    CriticalPoint(String),
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonconvergence { achieved: f64, requested: f64 },
    #[error("invalid partition of unity: {0}")]
    InvalidPartition(String),
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("moment map is not proper: {0}")]
    NotProper(String),
    #[error("assumption check failed: {0}")]
    AssumptionFailed(String),
    #[error("degenerate fitting window: {0}")]
    DegenerateWindow(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown selector: {0}")]
    UnknownSelector(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
