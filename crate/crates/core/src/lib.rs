//! Wildfire assessment pipeline: fuse georeferenced grids into multi-channel
//! samples, pretrain a convolutional encoder with a masked-patch objective,
//! transfer it to a six-output regression model, compare against tree
//! baselines and render assessment rasters.

// `!(x > y)` checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod geodata;

pub use error::{Result, WamError};
pub mod baselines;
pub mod dataset;
pub mod mapgen;
pub mod mim;
pub mod models;
pub mod pipeline;
pub mod seeds;
pub mod synth;
pub mod training;
