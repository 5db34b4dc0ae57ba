//! Spectral simulation of weakly coupled semilinear damped-wave and
//! reaction-diffusion systems, with blow-up time measurement, lifespan
//! fits and test-function audits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod config;
pub mod criticality;
pub mod error;
pub mod grid;
pub mod problem;
pub mod propagate;
pub mod run;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
