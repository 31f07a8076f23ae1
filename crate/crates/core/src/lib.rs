//! Strict local martingales with jumps, built by projecting continuous strict
//! local martingales onto filtrations generated by first-passage times.
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod compensator;
pub mod config;
pub mod error;
pub mod filtration;
pub mod market;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod projection;
pub mod report;
pub mod rng;
pub mod stats;
pub mod stochastics;

pub use error::{Error, Result};
pub use rng::RngSpec;
