//! Exact convergence analysis for independent Metropolis-Hastings chains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod discrete;
pub mod error;
pub mod fit;
pub mod general;
pub mod measures;
pub mod modelspec;
pub mod quadrature;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
