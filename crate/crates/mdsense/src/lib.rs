//! Micro-Doppler sensing of small UAVs from OFDM channel state information.
//!
//! The crate covers the whole simulation chain: a multi-scatterer UAV scene,
//! the resource-grid channel and CSI estimate, range processing, the
//! null-space-pursuit family of decompositions, synchroextracting
//! time-frequency analysis, and a Monte-Carlo benchmark harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod export;
pub mod grid;
pub mod matrix;
pub mod nsp;
mod par;
pub mod ranging;
pub mod scene;
pub mod tfa;

pub use error::{Error, Result};
pub use matrix::ComplexMatrix;
pub use par::Execution;
pub use num_complex::Complex64;

/// Propagation speed used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
