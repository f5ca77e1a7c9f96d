//! Self-supervised objectives (temporal classification, static and
//! temporal contrastive learning) and the training loop that drives them.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod losses;
pub mod moco;
pub mod pairs;
pub mod train;

pub use checkpoint::{load_backbone, save_backbone, Checkpoint, ContrastiveState, EpochMetrics, Head};
pub use config::{ContrastiveConfig, Objective, TrainConfig};
pub use data::{subsample_manifest, TrainingSet};
pub use losses::{argmax, info_nce_loss, info_nce_unchecked, temporal_classification_loss};
pub use moco::{effective_queue_size, momentum_update, Queue};
pub use pairs::{temporal_positive_pairs, temporal_positives};
pub use train::{classification_accuracy, embed_images, train, LogRecord, TrainOptions, TrainOutcome, MODEL_FILE};
