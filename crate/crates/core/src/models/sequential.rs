use rand_chacha::ChaCha8Rng;
use wam_grad::ops::{max_pool2, relu};
use wam_grad::{ParamId, ParamSet, RunningStats, Var};

use super::{ConvBn, Encoder, EncoderConfig, Forward};
use crate::Result;

/// Blocks of (conv, batch norm, ReLU) layers, each block closed by a 2×2
/// max pool.
#[derive(Clone, Debug)]
pub struct SequentialEncoder {
    pub blocks: Vec<Vec<ConvBn>>,
}

impl SequentialEncoder {
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
        Ok(Box::new(SequentialEncoder { blocks }))
    }
}

impl Encoder for SequentialEncoder {
    fn kind(&self) -> &'static str {
        "sequential"
    }

    fn params(&self) -> Vec<ParamId> {
        self.blocks.iter().flatten().flat_map(|l| l.params()).collect()
    }

    fn forward(&self, f: &mut Forward<'_>, mut x: Var) -> Result<Var> {
        for block in &self.blocks {
            for layer in block {
                let y = layer.forward(f, x)?;
                x = relu(f.tape, y);
            }
            x = max_pool2(f.tape, x)?;
        }
        Ok(x)
    }

    fn clone_box(&self) -> Box<dyn Encoder> {
        Box::new(self.clone())
    }
}
