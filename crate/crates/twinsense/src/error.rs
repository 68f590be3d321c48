//! Workspace-wide error type.
//!
//! The variants mirror the failure classes surfaced at the command line:
//! configuration problems exit with code 2, contract/data violations with 3,
//! and numeric failures with 4.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected input: dimension mismatch, empty series, out-of-domain argument.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Non-finite values where finite math is required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// API contract violation: stale cache, unfrozen bundle, label hygiene.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Bad or missing configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Degenerate data: constant image, zero intensity, rank-deficient fit.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// No usable signal response (flat calibration curve, unreliable fit).
    #[error("no usable signal response: {0}")]
    NoSignal(String),

    /// Geometry pushed outside the pixel grid.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Malformed container file or failed hash verification.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class: 2 usage, 3 contract, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numeric(_) => 4,
            _ => 3,
        }
    }
}
