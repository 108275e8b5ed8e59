use std::path::PathBuf;

use thiserror::Error;
use wam_grad::GradError;

pub type Result<T> = std::result::Result<T, WamError>;

#[derive(Debug, Error)]
pub enum WamError {
    #[error(transparent)]
    Grad(#[from] GradError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {msg}")]
    Parse { context: String, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("missing data for variable `{variable}` on {date}")]
    MissingData { variable: String, date: String },

    #[error("target axes fall outside source coverage: {0}")]
    OutOfCoverage(String),

    #[error("frame violation: a {window}×{window} window centred at ({lat:.5}, {lon:.5}) does not fit the region")]
    FrameViolation { lat: f64, lon: f64, window: usize },

    #[error("zero variance in channel `{0}`")]
    ZeroVariance(String),

    #[error("zero range in label `{0}`")]
    ZeroRange(String),

    #[error("UTM zone {0} outside 1..=60")]
    InvalidZone(u8),

    #[error("coordinate outside valid range: {0}")]
    InvalidCoordinate(String),

    #[error("checkpoint fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },

    #[error("{phase} diverged: non-finite loss at batch {batch}")]
    Divergence { phase: &'static str, batch: usize },

    #[error("empty evaluation set")]
    EmptyEvaluation,

    #[error("unknown {kind} `{name}` (known: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },
}

impl WamError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WamError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, msg: impl Into<String>) -> Self {
        WamError::Parse {
            context: context.into(),
            msg: msg.into(),
        }
    }
}
