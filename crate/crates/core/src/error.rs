use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation N = {n} too small: norm deficit {deficit:.3e} exceeds {tolerance:.1e}")]
    TruncationTooSmall { n: usize, deficit: f64, tolerance: f64 },

    #[error("state truncation {state} incompatible with {required}")]
    IncompatibleTruncation { state: usize, required: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{kind} value {value} outside [{lo}, {hi}]")]
    DomainMismatch { kind: &'static str, value: f64, lo: f64, hi: f64 },

    #[error("coarse-graining width must be positive, got {0}")]
    EpsilonNonpositive(f64),

    #[error("detection parameter s = {0} is not supported (only perfect detection, s = 0)")]
    UnsupportedS(f64),

    #[error("adaptive quadrature did not converge: estimated error {error:.3e} after {intervals} intervals")]
    QuadratureNotConverged { error: f64, intervals: usize },

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("x = {x} lies outside the classically allowed region |x| < {turning_point}")]
    OutsideAllowedRegion { x: f64, turning_point: f64 },

    #[error("table mismatch: {0}")]
    TableMismatch(String),

    #[error("sampling grid too narrow: probability mass {outside:.3e} lies outside")]
    GridTooNarrow { outside: f64 },

    #[error("no kernel available: {0}")]
    KernelMissing(String),

    #[error("dataset contains no records")]
    EmptyDataset,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("checksum mismatch: expected {expected}, found {found}")]
    Checksum { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
