//! Fairness-aware graph neural networks with limited sensitive attributes.
//!
//! The crate trains a graph classifier alongside a sensitive-attribute
//! estimator and a linear adversary, so that fair predictions can be learned
//! when only a small subset of nodes carries a sensitive label. It ships:
//!
//! - [`graph`]: immutable CSR graphs and symmetric adjacency normalization
//! - [`diffmath`]: a small reverse-mode tape over dense `f64` tensors, Adam,
//!   and a finite-difference gradient checker
//! - [`models`]: one-layer GCN / single-head GAT / MLP classifiers, the GCN
//!   sensitive-attribute estimator, and the linear adversary
//! - [`objectives`]: classification, estimator, adversary, and covariance
//!   losses with the combined min-max objective
//! - [`metrics`]: accuracy, AUC, statistical parity and equal opportunity gaps
//! - [`trainer`]: estimator pretraining, alternating adversarial training,
//!   model selection, and evaluation
//! - [`data`]: dataset text formats, split sampling, the biased synthetic
//!   graph generator, and binary checkpoints
//! - [`config`] / [`harness`]: experiment configuration, ablations, sweeps,
//!   and report rendering behind the `fairgnn` binary

pub mod config;
pub mod data;
pub mod diffmath;
mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod objectives;
pub mod trainer;

pub use error::{Error, Result};
