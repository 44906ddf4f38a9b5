//! Hierarchical sequence labeling on a small reverse-mode autodiff engine.
//!
//! The numeric core (tensors, tape, optimizer) is generic over the scalar
//! type via [`scalar::Scalar`]; everything model-facing runs in `f64`
//! through the aliases at the crate root.

pub mod adam;
pub mod data;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod projection;
pub mod scalar;
pub mod tape;
pub mod train;
pub mod tensor;

pub use params::ParamId;
pub use tape::{RowTargets, Var, PROB_FLOOR};

/// Default-precision tensor.
pub type Tensor = tensor::TensorData<f64>;
/// Default-precision autodiff tape.
pub type Tape = tape::Tape<f64>;
/// Default-precision parameter store.
pub type Params = params::ParamStore<f64>;
/// Default-precision optimizer.
pub type Adam = adam::Adam<f64>;
