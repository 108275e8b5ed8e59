//! Pretraining, transfer training, evaluation and the hyperparameter grid.

mod config;
mod evaluate;
mod finetune;
mod grid;
mod log;
mod pretrain;

pub use config::{DataConfig, FinetuneConfig, MapgenConfig, ModelSection, PretrainConfig, RunConfig, TransferMode};
pub use evaluate::{evaluate_mae, mae, mae_csv, predict_dataset, read_mae_csv, read_predictions, write_predictions};
pub use finetune::{finetune, FinetuneReport};
pub use grid::{grid_search, GridTable, GRID_BINS, GRID_LRS};
pub use log::{EpochRecord, MetricLog};
pub use pretrain::{evaluate_tasks, pretrain, PretrainReport};
