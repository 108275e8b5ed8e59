use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wam_grad::ops::{avg_pool, dropout, gelu, reshape};
use wam_grad::{ParamId, ParamSet, Var};

use super::layers::Dense;
use super::{Forward, ModelConfig};
use crate::Result;

/// Average-pools the latent onto the patch grid, then maps every grid
/// position to `channels × bins` logits.
#[derive(Clone, Debug)]
pub struct PatchDecoder {
    dense: Dense,
    pool: usize,
    grid: usize,
    channels: usize,
    bins: usize,
}

impl PatchDecoder {
    pub fn build(config: &ModelConfig, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Self {
        let grid = config.patch_grid();
        PatchDecoder {
            dense: Dense::build(
                "decoder.dense",
                config.latent_channels(),
                config.channels * config.bins(),
                params,
                rng,
            ),
            pool: config.latent_size() / grid,
            grid,
            channels: config.channels,
            bins: config.bins(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.dense.w, self.dense.b]
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Width of the position-wise dense layer.
    pub fn width(&self) -> usize {
        self.channels * self.bins
    }

    /// Logits of shape (batch·grid·grid·channels, bins), rows ordered
    /// (b, gy, gx, c).
    pub fn forward(&self, f: &mut Forward<'_>, latent: Var) -> Result<Var> {
        let pooled = if self.pool > 1 {
            avg_pool(f.tape, latent, self.pool)?
        } else {
            latent
        };
        let shape = f.tape.shape(pooled).to_vec();
        let rows = shape[0] * shape[1] * shape[2];
        let flat = reshape(f.tape, pooled, &[rows, shape[3]])?;
        let y = self.dense.forward(f, flat)?;
        Ok(reshape(f.tape, y, &[rows * self.channels, self.bins])?)
    }
}

/// Flatten, dropout, dense + GELU, then a linear output layer.
#[derive(Clone, Debug)]
pub struct RegressionHead {
    hidden: Dense,
    out: Dense,
    dropout: f64,
}

impl RegressionHead {
    pub fn build(config: &ModelConfig, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Self {
        let flat = config.latent_size() * config.latent_size() * config.latent_channels();
        RegressionHead {
            hidden: Dense::build("head.hidden", flat, config.head_hidden, params, rng),
            out: Dense::build("head.out", config.head_hidden, config.outputs, params, rng),
            dropout: config.dropout,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.hidden.w, self.hidden.b, self.out.w, self.out.b]
    }

    /// Outputs of shape (batch, outputs). Dropout is active only when an RNG
    /// is supplied.
    pub fn forward<R: Rng>(&self, f: &mut Forward<'_>, latent: Var, rng: Option<&mut R>) -> Result<Var> {
        let shape = f.tape.shape(latent).to_vec();
        let per: usize = shape[1..].iter().product();
        let flat = reshape(f.tape, latent, &[shape[0], per])?;
        let dropped = dropout(f.tape, flat, self.dropout, rng)?;
        let h = self.hidden.forward(f, dropped)?;
        let a = gelu(f.tape, h);
        self.out.forward(f, a)
    }
}
