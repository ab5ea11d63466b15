//! Reverse-mode automatic differentiation.

mod graph;
pub mod ops;

pub use graph::{BackwardCtx, BackwardFn, Gradients, Graph, Var};
