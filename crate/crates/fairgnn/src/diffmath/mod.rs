//! Dense tensors, a recording tape for reverse-mode differentiation, Adam,
//! and a finite-difference gradient checker.

mod adam;
mod check;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use check::{finite_diff_check, GradCheck};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
