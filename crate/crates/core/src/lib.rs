//! Gaussian continuous-variable dynamics of open quadratic bosonic systems.
//!
//! Covariance matrices use the interleaved ordering `(q1, p1, q2, p2, ...)`
//! with `hbar = 1`, so the vacuum has variance 1/2.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod cavity;
pub mod error;
pub mod gaussian;
pub mod ode;
pub mod oscillators;
pub mod quad;

pub use error::{Error, Result};
pub use gaussian::{CovarianceMatrix, Negativity};
