use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use wam_grad::{NormMode, ParamId, ParamSet, RunningStats, Tape, Var};

use super::{EncoderConfig, ResidualEncoder, SequentialEncoder};
use crate::{Result, WamError};

/// Batch-norm statistics access for one forward pass.
pub enum Norms<'a> {
    Train(&'a mut [RunningStats]),
    Infer(&'a [RunningStats]),
}

impl Norms<'_> {
    pub fn mode(&mut self, i: usize) -> NormMode<'_, f32> {
        match self {
            Norms::Train(s) => NormMode::Train(&mut s[i]),
            Norms::Infer(s) => NormMode::Infer(&s[i]),
        }
    }
}

/// Everything a layer needs to record itself on a tape.
pub struct Forward<'a> {
    pub tape: &'a mut Tape,
    pub params: &'a ParamSet,
    pub norms: Norms<'a>,
    /// Whether this component's parameters receive gradients.
    pub trainable: bool,
}

impl Forward<'_> {
    pub fn param(&mut self, id: ParamId) -> Var {
        self.tape.param(self.params, id, self.trainable)
    }
}

/// A convolutional encoder mapping (batch, s, s, c) to
/// (batch, s/8, s/8, filters[2]).
pub trait Encoder: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    fn params(&self) -> Vec<ParamId>;
    fn forward(&self, f: &mut Forward<'_>, x: Var) -> Result<Var>;
    fn clone_box(&self) -> Box<dyn Encoder>;
}

impl Clone for Box<dyn Encoder> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Allocates parameters and batch-norm slots for an encoder.
pub type EncoderBuilder = fn(
    config: &EncoderConfig,
    in_channels: usize,
    params: &mut ParamSet,
    norms: &mut Vec<RunningStats>,
    rng: &mut ChaCha8Rng,
) -> Result<Box<dyn Encoder>>;

/// Encoder architectures selectable by name.
#[derive(Clone)]
pub struct EncoderRegistry {
    builders: BTreeMap<String, EncoderBuilder>,
}

impl Default for EncoderRegistry {
    fn default() -> Self {
        let mut r = EncoderRegistry::empty();
        r.register("sequential", SequentialEncoder::build);
        r.register("residual", ResidualEncoder::build);
        r
    }
}

impl EncoderRegistry {
    pub fn empty() -> Self {
        EncoderRegistry {
            builders: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &str, builder: EncoderBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<EncoderBuilder> {
        self.builders.get(name).copied().ok_or_else(|| WamError::Unknown {
            kind: "encoder",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }
}
