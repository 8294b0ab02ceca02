//! Pilot pattern design and pilot-aided channel estimation for OFDM.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: regularized time-frequency plane, the seven pilot lattices and
//!   their rasterization onto the symbol x subcarrier grid.
//! - [`metrics`]: maximum / average nearest-pilot distance, projection spacings
//!   and the absorption-area (discrete Voronoi) partition.
//! - [`channel`]: doubly selective Rayleigh channel synthesis and AWGN.
//! - [`estimator`]: LS pilot estimates and the inverse-distance, linear and
//!   bilinear interpolators.
//! - [`modem`]: constellations, frame assembly and equalize/demap.
//! - [`harness`]: configuration, Monte-Carlo sweeps and result files.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod modem;
pub mod rng;

pub use error::{Error, Result};
