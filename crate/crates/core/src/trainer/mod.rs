//! Margin-ranking training with Adam, negative sampling, early stopping and
//! resumable checkpoints.

mod adam;
mod checkpoint;
mod config;
mod sample;
mod train;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::{apply_setting, load_config_file, parse_config_text, TrainConfig};
pub use sample::sample_batch;
pub use train::{train, training_index, EpochRecord, StopReason, TrainHistory, TrainOutcome, Trainer};
