//! Minimal reverse-mode automatic differentiation.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::finite_difference_check;
pub use graph::{inject_gradient_fault, logsumexp_slice, Gradients, Graph, Var};
pub use params::ParameterVector;
pub use tensor::Tensor;
