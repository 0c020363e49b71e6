//! A from-scratch recurrent-network training and evaluation pipeline for
//! tabular classification, with stratified cross-validation, a staged
//! hyperparameter search protocol, synthetic dataset generators, and a
//! linear-SVM baseline for comparison.
//!
//! The numeric substrate is deliberately minimal and fully deterministic:
//! dense `f64` matrices and a pinned SplitMix64 generator, so every seeded
//! experiment replays identically.

pub mod data;
pub mod error;
pub mod layers;
pub mod loss;
pub mod metrics;
pub mod model;
mod par;
pub mod pipeline;
pub mod search;
pub mod svm;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Matrix, Rng};

#[cfg(test)]
pub(crate) mod test_util;
