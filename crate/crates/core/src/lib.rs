//! Open-system simulation of a two-stage qutrit-to-qutrit state transfer
//! through two dispersively coupled, lossy resonators.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod lindblad;
pub mod model;
pub mod operators;
pub mod output;
pub mod protocol;
pub mod validation;

pub use error::{Error, Result};
