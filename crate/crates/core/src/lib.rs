//! Bayesian quantum state and process tomography with sequential Monte Carlo.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod qobj;
pub mod randq;
pub mod priors;
pub mod likelihood;
pub mod smc;
pub mod tracking;
pub mod design;
pub mod harness;

pub use error::{Error, Result};
