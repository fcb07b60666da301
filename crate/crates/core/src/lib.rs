//! Hyperparameter optimization toolkit: TPE, random and grid samplers, a
//! median pruner, a resumable JSON-lines journal, stratified cohort
//! preparation, affine augmentation and a small trainable surrogate
//! classifier for desk-scale studies.

pub mod augment;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod image;
pub mod orchestrator;
pub mod pruner;
pub mod report;
pub mod sampler;
pub mod space;
pub mod study;
pub mod surrogate;

pub use error::{Error, Result};
pub use space::{Direction, Distribution, ParamAssignment, ParamValue, SearchSpace};
pub use study::{Outcome, Study, TrialRecord, TrialState};
