//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors returned by studyforge operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value, bound, or shape failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// A distribution in the search space is malformed.
    #[error("invalid distribution for parameter '{name}': {reason}")]
    InvalidDistribution { name: String, reason: String },

    /// A trial was not in the state the operation required.
    #[error("trial {trial_id}: {reason}")]
    State { trial_id: usize, reason: String },

    /// An intermediate value was reported out of step order.
    #[error("trial {trial_id}: step {step} must be greater than last reported step {last}")]
    Ordering {
        trial_id: usize,
        step: u64,
        last: u64,
    },

    /// `best_trial` was requested before any trial completed.
    #[error("no completed trials in study")]
    NoCompletedTrials,

    /// The grid sampler has handed out every cell.
    #[error("search exhausted: all {0} grid cells have been evaluated")]
    Exhausted(usize),

    /// A precondition of a pure computation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Non-finite values appeared during training.
    #[error("divergence: {0}")]
    Divergence(String),

    /// Malformed input at a known line of a file.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    /// A journal record could not be decoded or is out of sequence.
    #[error("journal record {seq}: {reason}")]
    Journal { seq: u64, reason: String },

    /// Configuration problem at a key path such as `policy.n_trials`.
    #[error("config error at '{path}': {reason}")]
    Config { path: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
