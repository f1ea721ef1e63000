//! Simulation and analysis of noise-driven switching between coexisting
//! limit cycles in a driven optomechanical system.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod escape;
pub mod hmm;
pub mod meanfield;
pub mod model;
pub mod qjump;
pub mod stats;

pub use error::{Error, Result};
