//! Design and simulation toolkit for ultra-reliable wireless links.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: Gaussian tail function and its inverse.
//! - [`fbl`]: finite-blocklength normal approximation and its inverse problems.
//! - [`link`]: goodput with header/data error events, joint vs. separate encoding.
//! - [`channel`]: seeded SINR traces (block fading, shadowing, on/off interference).
//! - [`budget`]: channel uses to time/frequency/space resources.
//! - [`rsc`]: tiered service composition with hysteresis-gated tier selection.
//! - [`contention`]: multi-user rate curves and random-access latency curves.
//! - [`report`] and [`cli`]: configuration, deterministic reports, CSV/JSON output.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod channel;
pub mod cli;
pub mod contention;
pub mod error;
pub mod fbl;
pub mod link;
pub mod report;
pub mod rng;
pub mod rsc;
pub mod special;

pub use error::{Error, Result};
pub use fbl::{ChannelUseMode, FblQuery, FblResult};

/// Convert a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to decibels.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
