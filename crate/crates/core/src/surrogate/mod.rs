//! Desk-scale stand-in for image-classifier training: synthetic data, a
//! small MLP trained with Adam, evaluation metrics and analytic benchmarks.

pub mod adam;
pub mod benchmark;
pub mod dataset;
pub mod metrics;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use benchmark::Benchmark;
pub use dataset::{make_synthetic_dataset, Dataset, SyntheticSpec};
pub use metrics::{confusion_and_f1, ClassificationMetrics};
pub use mlp::{cross_entropy, softmax, ForwardPass, MlpModel};
pub use train::{train_and_evaluate, Hyperparams, TrainReport, TrainSettings, KNOWN_PARAMS};
