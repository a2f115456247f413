//! Linearized stability analysis of the two-phase Mullins–Sekerka flow with
//! a 90 degree contact angle in two dimensions.

// `!(x > 0.0)` is used throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dtn;
pub mod equilibria;
pub mod error;
pub mod evolution;
pub mod forms;
pub mod kernel;
pub mod model;
pub mod output;
pub mod spectrum;

pub use error::{Error, Result};
