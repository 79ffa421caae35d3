//! Projected and accelerated SGD on strongly convex quadratics, with the
//! step-size schedules, high-probability bounds and numeric checks around them.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod harness;
pub mod optimizers;
pub mod problems;
pub mod schedules;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
