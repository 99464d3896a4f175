//! Dense f64 tensors on an append-only differentiation graph.
//!
//! A [`Graph`] records every operation together with the values its backward
//! rule needs; [`Graph::backward`] runs one reverse sweep from a scalar loss
//! and accumulates gradients additively into each `requires_grad` ancestor.
//! Graph construction and backward are single-threaded; independent graphs
//! share no state.

mod check;
mod error;
mod graph;

pub use check::finite_diff_check;
pub use error::{Result, TensorError};
pub use graph::{Graph, Tensor, Var};
