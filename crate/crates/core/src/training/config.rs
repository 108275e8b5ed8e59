use std::path::Path;

use serde::{Deserialize, Serialize};

use chrono::NaiveDate;

use crate::models::ModelConfig;
use crate::synth::WorldConfig;
use crate::{Result, WamError};

/// Masked-patch pretraining settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub mask_prob: f64,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    /// Share of the unlabelled set held out for checkpoint selection.
    pub val_fraction: f64,
    /// Cap on training samples per epoch (0 = all).
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 50,
            batch: 32,
            lr: 1e-3,
            mask_prob: 0.5,
            patience: 10,
            val_fraction: 0.05,
            max_samples: 256,
            seed: 7,
        }
    }
}

impl PretrainConfig {
    /// Table-scale settings kept for reference.
    pub fn full() -> Self {
        PretrainConfig {
            epochs: 2000,
            batch: 64,
            lr: 1e-4,
            max_samples: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(WamError::Config("pretrain epochs and batch must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(WamError::Config(format!(
                "pretrain lr must be positive, found {}",
                self.lr
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(WamError::Config("pretrain val_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// How the pretrained encoder takes part in transfer training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Encoder weights held fixed; only the regression head trains.
    Frozen,
    /// Encoder and head train together.
    Finetune,
}

impl std::str::FromStr for TransferMode {
    type Err = WamError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(TransferMode::Frozen),
            "finetune" => Ok(TransferMode::Finetune),
            _ => Err(WamError::Unknown {
                kind: "transfer mode",
                name: s.to_string(),
                known: "finetune, frozen".into(),
            }),
        }
    }
}

impl TransferMode {
    pub fn name(self) -> &'static str {
        match self {
            TransferMode::Frozen => "frozen",
            TransferMode::Finetune => "finetune",
        }
    }
}

/// Regression transfer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneConfig {
    pub mode: TransferMode,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub patience: usize,
    /// Share of the training split held out for checkpoint selection.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            mode: TransferMode::Finetune,
            epochs: 60,
            batch: 32,
            lr: 1e-4,
            patience: 10,
            val_fraction: 0.15,
            seed: 7,
        }
    }
}

impl FinetuneConfig {
    pub fn full() -> Self {
        FinetuneConfig {
            epochs: 6000,
            lr: 1e-5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(WamError::Config("finetune epochs and batch must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(WamError::Config(format!(
                "finetune lr must be positive, found {}",
                self.lr
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(WamError::Config("finetune val_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Data preparation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub unlabelled: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            unlabelled: 2000,
            train_fraction: 0.7,
            seed: 7,
        }
    }
}

/// Model section of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `desk` or `full`.
    pub profile: String,
    pub encoder: String,
    pub bins: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            profile: "desk".into(),
            encoder: "residual".into(),
            bins: 64,
            seed: 7,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self) -> Result<ModelConfig> {
        let cfg = match self.profile.as_str() {
            "desk" => ModelConfig::desk(&self.encoder, self.bins),
            "full" => ModelConfig::full(&self.encoder, self.bins),
            other => {
                return Err(WamError::Unknown {
                    kind: "profile",
                    name: other.into(),
                    known: "desk, full".into(),
                })
            }
        };
        cfg.validate()?;
        crate::models::EncoderRegistry::default().get(&self.encoder)?;
        Ok(cfg)
    }
}

/// Whole-pipeline configuration with `[data]`, `[model]`, `[pretrain]` and
/// `[finetune]` sections. Missing keys take desk-scale defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub synth: WorldConfig,
    pub data: DataConfig,
    pub model: ModelSection,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    pub mapgen: MapgenConfig,
}

/// Regional inference settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapgenConfig {
    pub stride: usize,
    pub format: String,
    /// Defaults to the latest date with samples.
    pub date: Option<NaiveDate>,
}

impl Default for MapgenConfig {
    fn default() -> Self {
        MapgenConfig {
            stride: 4,
            format: "pgm".into(),
            date: None,
        }
    }
}

impl RunConfig {
    pub fn desk() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        RunConfig {
            data: DataConfig {
                unlabelled: 100_000,
                ..DataConfig::default()
            },
            model: ModelSection {
                profile: "full".into(),
                ..ModelSection::default()
            },
            pretrain: PretrainConfig::full(),
            finetune: FinetuneConfig::full(),
            mapgen: MapgenConfig {
                stride: 1,
                ..MapgenConfig::default()
            },
            synth: {
                let mut w = WorldConfig {
                    window: 128,
                    ..WorldConfig::default()
                };
                w.region.lat.count = 256;
                w.region.lon.count = 256;
                w
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| WamError::parse("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WamError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            WamError::Parse { msg, .. } => WamError::parse(path.display().to_string(), msg),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }

    /// Applies one root seed to every phase.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.data.seed = seed;
        self.model.seed = seed;
        self.pretrain.seed = seed;
        self.finetune.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.model_config()?;
        if self.synth.window != model.input_size {
            return Err(WamError::Config(format!(
                "synth window {} differs from the model input size {}",
                self.synth.window, model.input_size
            )));
        }
        if self.mapgen.stride == 0 {
            return Err(WamError::Config("mapgen stride must be positive".into()));
        }
        self.mapgen.format.parse::<crate::mapgen::RasterFormat>()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(WamError::Config("data train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
