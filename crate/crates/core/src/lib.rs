//! Gaussian-process Bayesian optimization in high dimensions, with tools for
//! studying how length-scale initialization affects hyperparameter training.

pub mod acquisition;
pub mod benchmarks;
pub mod bo;
pub mod diagnostics;
pub mod error;
pub mod gp;
mod linalg;
pub mod rng;
pub mod sobol;
mod sobol_table;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
