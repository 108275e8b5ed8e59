//! Dense NHWC tensors, a reverse-mode tape, the layer operations needed by
//! the convolutional encoders and heads, and an Adam optimizer.
//!
//! Every operation is generic over [`Scalar`] so the same code runs in `f32`
//! for training and in `f64` for finite-difference gradient checks.

pub mod adam;
pub mod error;
pub mod gradcheck;
mod linalg;
pub mod ops;
pub mod param;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use error::{GradError, Result};
pub use ops::{Mode, NormMode, RunningStats};
pub use param::{Param, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
