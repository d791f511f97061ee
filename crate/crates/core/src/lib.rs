//! Numerical laboratory for the least-norm linear interpolant.
//!
//! The crate provides the interpolant itself, samplers for a family of
//! adversarial joint distributions (a Gaussian base `D_n`, its discrete
//! resampling `Q_n` and the label-averaged `P_n`), closed-form risk and
//! effective-rank evaluation, empirical sub-Gaussian certification, and
//! Monte Carlo harnesses that audit generalization bounds.

pub mod certify;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod interpolant;
pub mod risk;

pub use error::{Error, Result};
