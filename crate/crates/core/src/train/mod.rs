//! Loss, optimizer, data pipeline and the training loop.

pub mod data;
pub mod loss;
pub mod optim;
pub mod synth;
pub mod trainer;

pub use data::{Augment, ImagePair, PairedDataset};
pub use loss::{loss_hybrid, FeatureExtractor, LossValue, LossWeights};
pub use optim::{cosine_lr, Adam, AdamConfig};
pub use synth::{synthetic_pairs, write_dataset, DarkenConfig};
pub use trainer::{train, train_from, TrainConfig, TrainOutcome, Trainer, TraceRow};
