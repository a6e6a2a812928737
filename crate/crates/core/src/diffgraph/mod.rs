//! Reverse-mode automatic differentiation over dense 2-D arrays.
//!
//! A [`Graph`] is an eagerly evaluated tape: every operation computes its
//! value immediately and records its parents, so [`Graph::backward`] only has
//! to walk the tape once in reverse. Values are always rank 2 (`n × k`);
//! scalars are `1 × 1`.
//!
//! The [`Ops`] trait abstracts over the handful of operations the coupling
//! network needs so the same code drives both the differentiable [`Graph`]
//! and the allocation-light [`Eager`] evaluator used at inference time.

mod check;
mod graph;
mod ops;
mod store;

pub use check::{central_difference, grad_check};
pub use graph::{Gradients, Graph, Var};
pub use ops::{Eager, Ops};
pub use store::{GradientMap, ParameterStore, TensorEntry, TensorManifest};
