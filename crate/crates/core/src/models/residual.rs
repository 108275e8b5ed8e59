use rand_chacha::ChaCha8Rng;
use wam_grad::ops::{add, gelu, max_pool2};
use wam_grad::{ParamId, ParamSet, RunningStats, Var};

use super::{ConvBn, Encoder, EncoderConfig, Forward};
use crate::Result;

/// Blocks of (conv, batch norm, GELU) layers in which every layer after the
/// first adds the previous activation before its own activation. Shortcuts
/// stay inside a block; each block ends with a 2×2 max pool.
#[derive(Clone, Debug)]
pub struct ResidualEncoder {
    pub blocks: Vec<Vec<ConvBn>>,
    pub skip_connections: bool,
}

impl ResidualEncoder {
    pub fn build(
        config: &EncoderConfig,
        in_channels: usize,
        params: &mut ParamSet,
        norms: &mut Vec<RunningStats>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Box<dyn Encoder>> {
        config.validate()?;
        let mut cin = in_channels;
        let mut blocks = Vec::new();
        for (b, &f) in config.filters.iter().enumerate() {
            let mut layers = Vec::new();
            for l in 0..config.layers_per_block {
                layers.push(ConvBn::build(
                    &format!("encoder.block{b}.conv{l}"),
                    config.kernel,
                    cin,
                    f,
                    params,
                    norms,
                    rng,
                ));
                cin = f;
            }
            blocks.push(layers);
        }
        Ok(Box::new(ResidualEncoder {
            blocks,
            skip_connections: config.skip_connections,
        }))
    }
}

impl Encoder for ResidualEncoder {
    fn kind(&self) -> &'static str {
        "residual"
    }

    fn params(&self) -> Vec<ParamId> {
        self.blocks.iter().flatten().flat_map(|l| l.params()).collect()
    }

    fn forward(&self, f: &mut Forward<'_>, mut x: Var) -> Result<Var> {
        for block in &self.blocks {
            for (l, layer) in block.iter().enumerate() {
                let mut y = layer.forward(f, x)?;
                if l > 0 && self.skip_connections {
                    y = add(f.tape, y, x)?;
                }
                x = gelu(f.tape, y);
            }
            x = max_pool2(f.tape, x)?;
        }
        Ok(x)
    }

    fn clone_box(&self) -> Box<dyn Encoder> {
        Box::new(self.clone())
    }
}
