//! Information bounds for finite-dimensional quantum parameter estimation.
//!
//! The crate computes the Helstrom information matrix, the Holevo bound and
//! its dual, integrated Bayesian (van Trees) bounds, and checks them against
//! Monte Carlo simulation of separable measurement schemes.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod error;
pub mod holevo;
pub mod information;
pub mod linalg;
pub mod numerics;
pub mod quantum;
pub mod regression;
pub mod serial;
pub mod simulate;

pub use error::{Error, Result};
pub use numerics::Numerics;
