//! Minimum-norm least-squares fitting and sample compression.

mod dataset;
pub mod io;
mod solver;

pub use dataset::{compress, CompressedDataset, CompressedPoint, Dataset};
pub use solver::{
    fit_compressed, least_norm_fit, predict, LinearModel, SolveMethod, SolverConfig,
};

pub(crate) use solver::dot;
