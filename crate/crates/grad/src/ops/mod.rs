//! Differentiable operations. Each takes the tape and input handles, computes
//! the forward value eagerly and registers a backward closure.

mod activation;
mod conv;
mod dense;
mod dropout;
mod elementwise;
mod loss;
mod norm;
mod pool;

pub use activation::{gelu, gelu_scalar, relu};
pub use conv::conv2d_same;
pub use dense::dense;
pub use dropout::dropout;
pub use elementwise::{add, reshape, weighted_sum};
pub use loss::{mse, sparse_categorical_xent};
pub use norm::{batch_norm, NormMode, RunningStats};
pub use pool::{avg_pool, max_pool2};

/// Train/inference switch for stochastic layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
