//! Encoder architectures, the patch decoder, the regression head and the
//! serializable model state.

mod config;
mod encoder;
mod heads;
mod layers;
mod residual;
mod sequential;
mod state;

pub use config::{EncoderConfig, ModelConfig};
pub use encoder::{Encoder, EncoderBuilder, EncoderRegistry, Forward, Norms};
pub use heads::{PatchDecoder, RegressionHead};
pub use layers::ConvBn;
pub use residual::ResidualEncoder;
pub use sequential::SequentialEncoder;
pub use state::{ModelState, Monitor, Snapshot, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
