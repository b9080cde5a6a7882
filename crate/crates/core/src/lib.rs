//! Simulation and analysis toolkit for the dispersion process on the
//! complete graph with loops, its critical window and diffusion limits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod harness;
pub mod iterated;
pub mod moments;
pub mod parallel;
pub mod process;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{LabError, Result};
