use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wam_grad::{ParamId, ParamSet, RunningStats, Tape, Tensor, Var};

use super::{Encoder, EncoderRegistry, Forward, ModelConfig, Norms, PatchDecoder, RegressionHead};
use crate::geodata::{channel_fingerprint, NormalizationStats};
use crate::seeds::{self, stream};
use crate::{Result, WamError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"WAMCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct NormEntry {
    channels: usize,
    initialized: bool,
    momentum: f32,
    eps: f32,
}

/// Metric value that triggered a checkpoint save.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub metric: String,
    pub value: f64,
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: String,
    config: ModelConfig,
    channel_order: String,
    seed: u64,
    params: Vec<ParamEntry>,
    norms: Vec<NormEntry>,
    stats: Option<NormalizationStats>,
    monitor: Option<Monitor>,
}

/// Trainable parameters, Adam moments, batch-norm statistics and
/// normalization statistics of one network, plus its architecture.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub config: ModelConfig,
    pub seed: u64,
    pub params: ParamSet,
    pub norms: Vec<RunningStats>,
    pub stats: Option<NormalizationStats>,
    pub monitor: Option<Monitor>,
    encoder: Box<dyn Encoder>,
    decoder: PatchDecoder,
    head: RegressionHead,
}

/// Parameter values and batch-norm statistics at one point of training.
#[derive(Clone, Debug)]
pub struct Snapshot {
    params: ParamSet,
    norms: Vec<RunningStats>,
}

impl ModelState {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_registry(config, seed, &EncoderRegistry::default())
    }

    pub fn with_registry(config: ModelConfig, seed: u64, registry: &EncoderRegistry) -> Result<Self> {
        config.validate()?;
        let mut rng = seeds::rng(seed, &[stream::INIT]);
        let mut params = ParamSet::new();
        let mut norms = Vec::new();
        let build = registry.get(&config.encoder.kind)?;
        let encoder = build(&config.encoder, config.channels, &mut params, &mut norms, &mut rng)?;
        let decoder = PatchDecoder::build(&config, &mut params, &mut rng);
        let head = RegressionHead::build(&config, &mut params, &mut rng);
        Ok(ModelState {
            config,
            seed,
            params,
            norms,
            stats: None,
            monitor: None,
            encoder,
            decoder,
            head,
        })
    }

    pub fn config_fingerprint(config: &ModelConfig) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(config).expect("plain data serializes"));
        h.update(b"\n");
        h.update(channel_fingerprint().as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn fingerprint(&self) -> String {
        Self::config_fingerprint(&self.config)
    }

    pub fn encoder_kind(&self) -> &'static str {
        self.encoder.kind()
    }

    pub fn encoder_params(&self) -> Vec<ParamId> {
        self.encoder.params()
    }

    pub fn decoder_params(&self) -> Vec<ParamId> {
        self.decoder.params()
    }

    pub fn head_params(&self) -> Vec<ParamId> {
        self.head.params()
    }

    pub fn decoder(&self) -> &PatchDecoder {
        &self.decoder
    }

    /// Encoder pass with batch statistics; running statistics are updated.
    pub fn encode_train(&mut self, tape: &mut Tape, x: Var, trainable: bool) -> Result<Var> {
        let mut f = Forward {
            tape,
            params: &self.params,
            norms: Norms::Train(&mut self.norms),
            trainable,
        };
        self.encoder.forward(&mut f, x)
    }

    /// Encoder pass with running statistics.
    pub fn encode_infer(&self, tape: &mut Tape, x: Var, trainable: bool) -> Result<Var> {
        let mut f = Forward {
            tape,
            params: &self.params,
            norms: Norms::Infer(&self.norms),
            trainable,
        };
        self.encoder.forward(&mut f, x)
    }

    pub fn decode(&self, tape: &mut Tape, latent: Var, trainable: bool) -> Result<Var> {
        let mut f = Forward {
            tape,
            params: &self.params,
            norms: Norms::Infer(&[]),
            trainable,
        };
        self.decoder.forward(&mut f, latent)
    }

    pub fn regress<R: Rng>(&self, tape: &mut Tape, latent: Var, trainable: bool, rng: Option<&mut R>) -> Result<Var> {
        let mut f = Forward {
            tape,
            params: &self.params,
            norms: Norms::Infer(&[]),
            trainable,
        };
        self.head.forward(&mut f, latent, rng)
    }

    fn batched(&self, x: &Tensor) -> Result<Tensor> {
        let s = self.config.input_size;
        let c = self.config.channels;
        match *x.shape() {
            [h, w, ch] if h == s && w == s && ch == c => Ok(x.clone().reshape(&[1, s, s, c])?),
            [_, h, w, ch] if h == s && w == s && ch == c => Ok(x.clone()),
            _ => Err(WamError::Config(format!(
                "model expects {s}×{s}×{c} inputs, found {:?}",
                x.shape()
            ))),
        }
    }

    /// Inference-mode latent map of a sample or batch.
    pub fn latent(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let xv = tape.constant(self.batched(x)?);
        let z = self.encode_infer(&mut tape, xv, false)?;
        Ok(tape.value(z).clone())
    }

    /// Inference-mode decoder logits of a sample or batch.
    pub fn patch_logits(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let xv = tape.constant(self.batched(x)?);
        let z = self.encode_infer(&mut tape, xv, false)?;
        let l = self.decode(&mut tape, z, false)?;
        Ok(tape.value(l).clone())
    }

    /// Inference-mode head outputs (label space) for a batch of latents.
    pub fn regress_latent(&self, latent: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let z = tape.constant(latent.clone());
        let y = self.regress::<rand_chacha::ChaCha8Rng>(&mut tape, z, false, None)?;
        Ok(tape.value(y).clone())
    }

    /// Inference-mode outputs (label space) for a sample or batch.
    pub fn predict_normalized(&self, x: &Tensor) -> Result<Tensor> {
        self.regress_latent(&self.latent(x)?)
    }

    /// Denormalized prediction for one sample.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        let y = self.predict_normalized(x)?;
        self.denormalize(y.row(0))
    }

    pub fn denormalize(&self, y: &[f32]) -> Result<Vec<f64>> {
        let labels = self
            .stats
            .as_ref()
            .and_then(|s| s.labels.as_ref())
            .ok_or_else(|| WamError::Config("model has no label statistics".into()))?;
        Ok(y.iter().enumerate().map(|(i, &v)| labels.invert(i, v as f64)).collect())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            params: self.params.clone(),
            norms: self.norms.clone(),
        }
    }

    pub fn restore(&mut self, snapshot: Snapshot) {
        self.params = snapshot.params;
        self.norms = snapshot.norms;
    }

    pub fn reset_moments(&mut self) {
        for id in self.params.ids().collect::<Vec<_>>() {
            self.params.get_mut(id).reset_moments();
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            fingerprint: self.fingerprint(),
            config: self.config.clone(),
            channel_order: channel_fingerprint(),
            seed: self.seed,
            params: self
                .params
                .iter()
                .map(|(_, name, p)| ParamEntry {
                    name: name.to_string(),
                    shape: p.value.shape().to_vec(),
                    step: p.step,
                })
                .collect(),
            norms: self
                .norms
                .iter()
                .map(|n| NormEntry {
                    channels: n.channels(),
                    initialized: n.initialized,
                    momentum: n.momentum,
                    eps: n.eps,
                })
                .collect(),
            stats: self.stats.clone(),
            monitor: self.monitor.clone(),
        };
        let header = serde_json::to_vec(&header).expect("plain data serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, _, p) in self.params.iter() {
            out.extend(p.value.to_le_bytes());
            out.extend(p.m.to_le_bytes());
            out.extend(p.v.to_le_bytes());
        }
        for n in &self.norms {
            out.extend(n.mean.iter().flat_map(|v| v.to_le_bytes()));
            out.extend(n.var.iter().flat_map(|v| v.to_le_bytes()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_bytes_with(bytes, &EncoderRegistry::default())
    }

    pub fn from_bytes_with(bytes: &[u8], registry: &EncoderRegistry) -> Result<Self> {
        let bad = |m: &str| WamError::parse("checkpoint", m.to_string());
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated header"))?;
        let len = u64::from_le_bytes(len) as usize;
        if r.len() < len {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&r[..len]).map_err(|e| bad(&e.to_string()))?;
        r = &r[len..];
        if header.channel_order != channel_fingerprint() {
            return Err(WamError::Fingerprint {
                expected: channel_fingerprint(),
                found: header.channel_order,
            });
        }
        let mut state = Self::with_registry(header.config, header.seed, registry)?;
        if header.fingerprint != state.fingerprint() {
            return Err(WamError::Fingerprint {
                expected: state.fingerprint(),
                found: header.fingerprint,
            });
        }
        if header.params.len() != state.params.len() || header.norms.len() != state.norms.len() {
            return Err(bad("parameter layout disagrees with the configuration"));
        }
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n * 4 {
                return Err(bad("truncated tensor data"));
            }
            let (head, tail) = r.split_at(n * 4);
            r = tail;
            Ok(head)
        };
        let ids: Vec<ParamId> = state.params.ids().collect();
        for (id, entry) in ids.into_iter().zip(&header.params) {
            if state.params.name(id) != entry.name || state.params.get(id).value.shape() != entry.shape.as_slice() {
                return Err(bad(&format!("unexpected parameter `{}`", entry.name)));
            }
            let n = entry.shape.iter().product();
            let value = Tensor::from_le_bytes(&entry.shape, take(n)?)?;
            let m = Tensor::from_le_bytes(&entry.shape, take(n)?)?;
            let v = Tensor::from_le_bytes(&entry.shape, take(n)?)?;
            let p = state.params.get_mut(id);
            p.value = value;
            p.m = m;
            p.v = v;
            p.step = entry.step;
        }
        for (norm, entry) in state.norms.iter_mut().zip(&header.norms) {
            if norm.channels() != entry.channels {
                return Err(bad("batch-norm layout disagrees with the configuration"));
            }
            norm.mean = Tensor::from_le_bytes(&[entry.channels], take(entry.channels)?)?.into_data();
            norm.var = Tensor::from_le_bytes(&[entry.channels], take(entry.channels)?)?.into_data();
            norm.initialized = entry.initialized;
            norm.momentum = entry.momentum;
            norm.eps = entry.eps;
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        state.stats = header.stats;
        state.monitor = header.monitor;
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| WamError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| WamError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads a checkpoint and rejects it unless it was written for `config`.
    pub fn load_expecting(path: &Path, config: &ModelConfig) -> Result<Self> {
        let state = Self::load(path)?;
        let expected = Self::config_fingerprint(config);
        if state.fingerprint() != expected {
            return Err(WamError::Fingerprint {
                expected,
                found: state.fingerprint(),
            });
        }
        Ok(state)
    }
}
