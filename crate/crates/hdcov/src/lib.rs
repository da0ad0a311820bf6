//! Monte Carlo engines, file formats, and verification checks on top of
//! the `hdcov-core` closed forms.
//!
//! Every randomized routine draws from counter-derived ChaCha substreams
//! (one per replicate), collects per-replicate values into an indexed
//! buffer, and reduces in fixed order, so results are bitwise identical
//! across runs and across worker counts.

// Validation deliberately uses `!(x > 0.0)` so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod formats;
pub mod mc;
pub mod sample;
pub mod verify;

pub use hdcov_core::calibrate::{CalibrationMethod, Decision, MeanMode, NullCalibration};
pub use hdcov_core::stats::TestKind;
pub use hdcov_core::{Error, Matrix, Result};
pub use mc::McEstimate;

/// Errors at the IO/CLI boundary, split by who is at fault: `User`
/// failures exit with code 2, `Internal` ones with code 1.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    Internal(String),
}

impl From<Error> for LabError {
    fn from(e: Error) -> Self {
        LabError::User(e.to_string())
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
