//! Integrated Gradients attributions for a signal/background event classifier,
//! with zero and background-averaged baselines and a top-k retraining harness
//! for judging which baseline orders features best.

pub mod attribution;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod nn;
pub mod parallel;
pub mod pipeline;
pub mod reporting;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use parallel::Execution;
