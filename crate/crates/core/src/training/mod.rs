//! Objective, optimizer, training loop and checkpoint persistence.

mod adam;
mod checkpoint;
mod config;
mod fit;
mod gradcheck;
mod target;

pub use adam::{adam_update, clip_global_norm, global_norm, AdamConfig, OptimizerState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Precision, TrainConfig, TrainMode};
pub use fit::{config_fingerprint, fit, TrainHistory, Trainer};
pub use gradcheck::{model_gradcheck, ModelLoss};
pub use target::{build_target, prediction_loss, repeat_frame};
