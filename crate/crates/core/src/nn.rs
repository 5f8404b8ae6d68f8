//! Neural core: tensors, kernels, tape autodiff, parameters, optimizer.
//!
//! Everything is plain `f64` on the heap with no external numeric
//! dependencies, sized for desk-scale models that train in seconds and can
//! be verified end-to-end by finite differences.

pub mod adam;
pub mod gradcheck;
pub mod kernels;
pub mod model;
pub mod params;
pub mod tape;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{Dims, Model, ModelParams, Vocab};
pub use params::{ParamGrads, ParamId, ParameterStore, Tensor};
pub use tape::{NodeRef, Op, Tape};
