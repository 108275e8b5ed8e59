use thiserror::Error;

pub type Result<T> = std::result::Result<T, GradError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("{op}: shape mismatch, expected {expected:?} but found {found:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("{op}: {msg}")]
    Config { op: &'static str, msg: String },
    #[error("batch_norm: uninitialized running statistics")]
    UninitializedRunningStats,
    #[error("sparse_categorical_xent: no supervised positions")]
    NoSupervisedPositions,
    #[error("adam: non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("backward: loss must be a single element, found shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}

impl GradError {
    pub(crate) fn shape(op: &'static str, expected: &[usize], found: &[usize]) -> Self {
        GradError::Shape {
            op,
            expected: expected.to_vec(),
            found: found.to_vec(),
        }
    }

    pub(crate) fn config(op: &'static str, msg: impl Into<String>) -> Self {
        GradError::Config { op, msg: msg.into() }
    }
}
