use serde::{Deserialize, Serialize};

use crate::geodata::{NUM_CHANNELS, NUM_LABELS};
use crate::mim::{patch_grid, BinningScheme};
use crate::{Result, WamError};

/// Convolutional encoder shape. `kind` selects the registered architecture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: String,
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub layers_per_block: usize,
    /// In-block shortcuts of the residual encoder.
    #[serde(default = "default_true")]
    pub skip_connections: bool,
}

fn default_true() -> bool {
    true
}

impl EncoderConfig {
    pub fn sequential(filters: &[usize]) -> Self {
        EncoderConfig {
            kind: "sequential".into(),
            filters: filters.to_vec(),
            kernel: 3,
            layers_per_block: 1,
            skip_connections: false,
        }
    }

    pub fn residual(filters: &[usize]) -> Self {
        EncoderConfig {
            kind: "residual".into(),
            filters: filters.to_vec(),
            kernel: 3,
            layers_per_block: 4,
            skip_connections: true,
        }
    }

    /// Encoder of the given kind with its default block depth.
    pub fn of_kind(kind: &str, filters: &[usize]) -> Self {
        match kind {
            "residual" => Self::residual(filters),
            "sequential" => Self::sequential(filters),
            other => EncoderConfig {
                kind: other.into(),
                ..Self::sequential(filters)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters.len() != 3 {
            return Err(WamError::Config(format!(
                "encoder needs exactly 3 blocks, found {}",
                self.filters.len()
            )));
        }
        if self.filters.windows(2).any(|w| w[1] <= w[0]) || self.filters[0] == 0 {
            return Err(WamError::Config(format!(
                "encoder filters must be strictly increasing, found {:?}",
                self.filters
            )));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(WamError::Config(format!("kernel extent {} must be odd", self.kernel)));
        }
        if self.layers_per_block == 0 {
            return Err(WamError::Config("layers_per_block must be positive".into()));
        }
        Ok(())
    }

    /// Spatial reduction factor of the whole encoder.
    pub fn downsampling(&self) -> usize {
        1 << self.filters.len()
    }
}

/// Full network configuration; hashed into the checkpoint fingerprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_size: usize,
    pub channels: usize,
    pub encoder: EncoderConfig,
    pub patch: usize,
    pub binning: BinningScheme,
    pub head_hidden: usize,
    pub dropout: f64,
    pub outputs: usize,
}

impl ModelConfig {
    /// 32×32 inputs, filters 32/64/128 and a 4×4 patch grid.
    pub fn desk(kind: &str, bins: usize) -> Self {
        ModelConfig {
            input_size: 32,
            channels: NUM_CHANNELS,
            encoder: EncoderConfig::of_kind(kind, &[32, 64, 128]),
            patch: 8,
            binning: BinningScheme::uniform(bins, -4.0, 4.0, NUM_CHANNELS).expect("valid bins"),
            head_hidden: 512,
            dropout: 0.7,
            outputs: NUM_LABELS,
        }
    }

    /// 128×128 inputs, filters 128/256/512 and an 8×8 patch grid.
    pub fn full(kind: &str, bins: usize) -> Self {
        ModelConfig {
            input_size: 128,
            encoder: EncoderConfig::of_kind(kind, &[128, 256, 512]),
            patch: 16,
            ..Self::desk(kind, bins)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.binning.validate()?;
        if self.binning.channels() != self.channels {
            return Err(WamError::Config("binning channels disagree with input channels".into()));
        }
        let down = self.encoder.downsampling();
        if self.input_size == 0 || !self.input_size.is_multiple_of(down) {
            return Err(WamError::Config(format!(
                "input extent {} is not divisible by {down}",
                self.input_size
            )));
        }
        let grid = patch_grid(self.input_size, self.patch)?;
        let latent = self.latent_size();
        if !latent.is_multiple_of(grid) {
            return Err(WamError::Config(format!(
                "latent extent {latent} cannot be pooled onto a {grid}×{grid} patch grid"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(WamError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn latent_size(&self) -> usize {
        self.input_size / self.encoder.downsampling()
    }

    pub fn latent_channels(&self) -> usize {
        *self.encoder.filters.last().expect("three blocks")
    }

    pub fn patch_grid(&self) -> usize {
        self.input_size / self.patch
    }

    pub fn bins(&self) -> usize {
        self.binning.bins
    }
}
