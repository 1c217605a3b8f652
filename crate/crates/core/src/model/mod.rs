//! Classifier construction, training with early stopping, and checkpoints.

mod checkpoint;
mod config;
mod history;
mod network;
mod train;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, read_checkpoint_header, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{LossKind, ModelConfig, Monitor, OptimizerKind, TrainingConfig};
pub use history::{
    history_to_csv, parse_history_csv, read_history_csv, should_stop, write_history_csv, EpochRecord, TrainingHistory,
    HISTORY_HEADER,
};
pub use network::{backbone_spec, build_classifier, BackboneSpec, Classifier, Prediction};
pub use train::{
    evaluate_images, fit, load_split, train, CandleRunner, EpochRunner, LabeledImages, ScriptedRunner, TrainingData,
};
