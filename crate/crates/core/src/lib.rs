//! Core numerics for high-dimensional covariance testing.
//!
//! This crate holds the deterministic, closed-form side of the toolkit:
//! covariance model construction, the four test statistics (identity LRT,
//! Ledoit-Nagao-Wolf, sphericity LRT, John) together with their hand-coded
//! derivatives, analytic power formulas, null calibration formulas, Wishart
//! trace moments, and the contiguity diagnostics built on top of them.
//!
//! Everything here is pure: no RNG, no IO, no threads. Monte Carlo engines,
//! file formats and the CLI live in the companion `hdcov` crate.

#![no_std]
// Validation deliberately uses `!(x > 0.0)` so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod calibrate;
pub mod contiguity;
pub mod dist;
pub mod error;
pub mod model;
pub mod moments;
pub mod power;
pub mod stats;
pub mod umatrix;

pub use error::{Error, Result};

/// Dense column-major `f64` matrix used throughout.
pub type Matrix = nalgebra::DMatrix<f64>;
