use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wam_grad::ops::{batch_norm, conv2d_same, dense};
use wam_grad::{ParamId, ParamSet, RunningStats, Tensor, Var};

use super::Forward;
use crate::Result;

/// Uniform fan-in scaled weights in ±sqrt(6 / fan_in).
pub(crate) fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt() as f32;
    Tensor::from_fn(shape, |_| rng.gen_range(-limit..limit))
}

/// Convolution followed by batch normalization.
#[derive(Clone, Debug)]
pub struct ConvBn {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub norm: usize,
}

impl ConvBn {
    pub fn build(
        name: &str,
        k: usize,
        cin: usize,
        cout: usize,
        params: &mut ParamSet,
        norms: &mut Vec<RunningStats>,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let kernel = params.add(
            format!("{name}.kernel"),
            he_uniform(&[k, k, cin, cout], k * k * cin, rng),
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        let gamma = params.add(format!("{name}.gamma"), Tensor::full(&[cout], 1.0));
        let beta = params.add(format!("{name}.beta"), Tensor::zeros(&[cout]));
        norms.push(RunningStats::new(cout));
        ConvBn {
            kernel,
            bias,
            gamma,
            beta,
            norm: norms.len() - 1,
        }
    }

    pub fn params(&self) -> [ParamId; 4] {
        [self.kernel, self.bias, self.gamma, self.beta]
    }

    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var> {
        let k = f.param(self.kernel);
        let b = f.param(self.bias);
        let y = conv2d_same(f.tape, x, k, b)?;
        let g = f.param(self.gamma);
        let be = f.param(self.beta);
        let mode = f.norms.mode(self.norm);
        Ok(batch_norm(f.tape, y, g, be, mode)?)
    }
}

/// Fully connected layer.
#[derive(Clone, Debug)]
pub(crate) struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn build(name: &str, inp: usize, out: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            w: params.add(format!("{name}.w"), he_uniform(&[inp, out], inp, rng)),
            b: params.add(format!("{name}.b"), Tensor::zeros(&[out])),
        }
    }

    pub fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var> {
        let w = f.param(self.w);
        let b = f.param(self.b);
        Ok(dense(f.tape, x, w, b)?)
    }
}
