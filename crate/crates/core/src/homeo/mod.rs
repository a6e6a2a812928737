//! Primitives as deformed spheres.
//!
//! A [`ConditionalHomeomorphism`] is a stack of conditional affine coupling
//! layers shared by every primitive; primitive `m` is selected by its row of
//! the shape-embedding table. [`NeuralParts`] bundles the architecture with
//! its parameters and answers inference queries: forward and inverse
//! mapping, implicit fields, surface points and meshes.

mod flow;
mod model;

pub use flow::{
    ConditionalHomeomorphism, CouplingLayer, FinalActivation, HomeoConfig, LayerCondition, MlpSpec, ParamSpec,
    EMBEDDINGS,
};
pub use model::{union_of, NeuralParts, UnionSurface, SURFACE_EPS};
