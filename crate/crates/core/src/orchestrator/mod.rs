//! Study execution: the journal, objectives and the trial loop.

pub mod journal;
pub mod objective;
pub mod runner;

pub use journal::{
    read_journal, reopen, replay, replay_finalized, resume_from_bytes, resume_study, Journal,
    JournalRecord, RecordKind, Replay,
};
pub use objective::{Evaluation, FnObjective, Objective, Reporter, SurrogateObjective};
pub use runner::{run_study, RunContext, RunPolicy, RunSummary, StopReason};
