//! Append-only JSON-lines journal of study events.
//!
//! Every record is one line, appended and synced before `append` returns.
//! A torn final line (from a crash mid-write) is ignored on read; any
//! other undecodable line is an error naming its sequence number.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Direction, ParamAssignment, SearchSpace};
use crate::study::{Outcome, Study, TrialState};
use crate::surrogate::ClassificationMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    StudyMeta,
    TrialStart,
    Intermediate,
    TrialEnd,
    Checkpoint,
}

/// One journal line. Fields irrelevant to a record's kind are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JournalRecord {
    pub seq: u64,
    pub kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<TrialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_params: Option<ParamAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Validation confusion matrix of a completed classifier trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<Vec<f64>>,
}

impl JournalRecord {
    fn empty(kind: RecordKind) -> Self {
        Self {
            seq: 0,
            kind,
            trial_id: None,
            params: None,
            step: None,
            value: None,
            state: None,
            final_value: None,
            best_params: None,
            space: None,
            direction: None,
            seed: None,
            config_hash: None,
            confusion: None,
            f1: None,
        }
    }

    pub fn study_meta(
        space: &SearchSpace,
        direction: Direction,
        seed: u64,
        config_hash: &str,
    ) -> Self {
        Self {
            space: Some(space.clone()),
            direction: Some(direction),
            seed: Some(seed),
            config_hash: Some(config_hash.to_string()),
            ..Self::empty(RecordKind::StudyMeta)
        }
    }

    pub fn trial_start(trial_id: usize, params: &ParamAssignment) -> Self {
        Self {
            trial_id: Some(trial_id),
            params: Some(params.clone()),
            ..Self::empty(RecordKind::TrialStart)
        }
    }

    pub fn intermediate(trial_id: usize, step: u64, value: f64) -> Self {
        Self {
            trial_id: Some(trial_id),
            step: Some(step),
            value: Some(value),
            ..Self::empty(RecordKind::Intermediate)
        }
    }

    pub fn trial_end(
        trial_id: usize,
        outcome: Outcome,
        metrics: Option<&ClassificationMetrics>,
    ) -> Self {
        let (state, final_value) = match outcome {
            Outcome::Value(v) => (TrialState::Complete, Some(v)),
            Outcome::Pruned => (TrialState::Pruned, None),
            Outcome::Failed => (TrialState::Failed, None),
        };
        Self {
            trial_id: Some(trial_id),
            state: Some(state),
            final_value,
            confusion: metrics.map(|m| m.confusion.clone()),
            f1: metrics.map(|m| m.f1.clone()),
            ..Self::empty(RecordKind::TrialEnd)
        }
    }

    pub fn checkpoint(trial_id: usize, value: f64, best_params: &ParamAssignment) -> Self {
        Self {
            trial_id: Some(trial_id),
            value: Some(value),
            best_params: Some(best_params.clone()),
            ..Self::empty(RecordKind::Checkpoint)
        }
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = seq;
        self
    }
}

/// Writable handle on a journal file.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl Journal {
    /// Creates (or truncates) a journal at `path`.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let file = File::create(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            next_seq: 0,
        })
    }

    /// Opens an existing journal for further appends, cutting off a torn
    /// final line first.
    pub fn open_append(path: &Path) -> Result<(Self, Vec<JournalRecord>)> {
        let bytes = fs::read(path)?;
        let (records, valid_len) = decode(&bytes)?;
        let file = OpenOptions::new().write(true).open(path)?;
        file.set_len(valid_len as u64)?;
        let mut file = OpenOptions::new().append(true).open(path)?;
        if valid_len > 0 && bytes[valid_len - 1] != b'\n' {
            // A complete record without its newline.
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        let next_seq = records.len() as u64;
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
                next_seq,
            },
            records,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Appends a record whose `seq` must equal [`Journal::next_seq`].
    pub fn append(&mut self, record: &JournalRecord) -> Result<()> {
        if record.seq != self.next_seq {
            return Err(Error::Journal {
                seq: record.seq,
                reason: format!("sequence gap: expected {}", self.next_seq),
            });
        }
        if self.next_seq == 0 && record.kind != RecordKind::StudyMeta {
            return Err(Error::Journal {
                seq: 0,
                reason: "first record must be study-meta".into(),
            });
        }
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.next_seq += 1;
        Ok(())
    }

    /// Stamps the next sequence number onto `record` and appends it.
    pub fn append_next(&mut self, record: JournalRecord) -> Result<u64> {
        let seq = self.next_seq;
        self.append(&record.with_seq(seq))?;
        Ok(seq)
    }
}

/// Decodes journal bytes, returning the records and the length of the
/// durable prefix.
pub fn decode(bytes: &[u8]) -> Result<(Vec<JournalRecord>, usize)> {
    let mut records = Vec::new();
    let mut offset = 0;
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        let (line, terminated) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let expected = records.len() as u64;
        match serde_json::from_slice::<JournalRecord>(line) {
            Ok(rec) => {
                if rec.seq != expected {
                    return Err(Error::Journal {
                        seq: rec.seq,
                        reason: format!("out of sequence, expected {expected}"),
                    });
                }
                if expected == 0 && rec.kind != RecordKind::StudyMeta {
                    return Err(Error::Journal {
                        seq: 0,
                        reason: "first record must be study-meta".into(),
                    });
                }
                records.push(rec);
                offset += line.len() + usize::from(terminated);
            }
            Err(_) if !terminated => break,
            Err(e) => {
                return Err(Error::Journal {
                    seq: expected,
                    reason: format!("corrupt record: {e}"),
                })
            }
        }
    }
    Ok((records, offset))
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalRecord>> {
    Ok(decode(&fs::read(path)?)?.0)
}

/// A study rebuilt from its journal plus per-trial side information.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub study: Study,
    pub config_hash: String,
    /// `(trial_id, value)` of every checkpoint record.
    pub checkpoints: Vec<(usize, f64)>,
    /// Validation metrics recorded with completed trials, indexed by trial id.
    pub metrics: Vec<Option<ClassificationMetrics>>,
    /// Trials that were still running at the end of the journal.
    pub interrupted: Vec<usize>,
}

fn field<T>(v: Option<T>, rec: &JournalRecord, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Journal {
        seq: rec.seq,
        reason: format!("{:?} record is missing '{name}'", rec.kind),
    })
}

/// Rebuilds the study state from decoded records. Trials left running are
/// reported in `interrupted` but not transitioned.
pub fn replay(records: &[JournalRecord]) -> Result<Replay> {
    let meta = records.first().ok_or_else(|| Error::Journal {
        seq: 0,
        reason: "journal is empty".into(),
    })?;
    let space = field(meta.space.clone(), meta, "space")?;
    let direction = field(meta.direction, meta, "direction")?;
    let seed = field(meta.seed, meta, "seed")?;
    let config_hash = meta.config_hash.clone().unwrap_or_default();
    let mut study = Study::create(space, direction, seed)?;
    let mut checkpoints = Vec::new();
    let mut metrics: Vec<Option<ClassificationMetrics>> = Vec::new();
    let wrap = |rec: &JournalRecord, e: Error| Error::Journal {
        seq: rec.seq,
        reason: e.to_string(),
    };
    for rec in &records[1..] {
        match rec.kind {
            RecordKind::StudyMeta => {
                return Err(Error::Journal {
                    seq: rec.seq,
                    reason: "duplicate study-meta".into(),
                })
            }
            RecordKind::TrialStart => {
                let id = field(rec.trial_id, rec, "trial_id")?;
                if id != study.trials().len() {
                    return Err(Error::Journal {
                        seq: rec.seq,
                        reason: format!("trial id {id} out of order"),
                    });
                }
                let params = field(rec.params.as_ref(), rec, "params")?;
                let params = study
                    .space()
                    .coerce_assignment(params)
                    .map_err(|e| wrap(rec, e))?;
                study.start_trial_with(params).map_err(|e| wrap(rec, e))?;
                metrics.push(None);
            }
            RecordKind::Intermediate => {
                let id = field(rec.trial_id, rec, "trial_id")?;
                let step = field(rec.step, rec, "step")?;
                let value = field(rec.value, rec, "value")?;
                study
                    .report_intermediate(id, step, value)
                    .map_err(|e| wrap(rec, e))?;
            }
            RecordKind::TrialEnd => {
                let id = field(rec.trial_id, rec, "trial_id")?;
                let outcome = match field(rec.state, rec, "state")? {
                    TrialState::Complete => {
                        Outcome::Value(field(rec.final_value, rec, "final_value")?)
                    }
                    TrialState::Pruned => Outcome::Pruned,
                    TrialState::Failed => Outcome::Failed,
                    TrialState::Running => {
                        return Err(Error::Journal {
                            seq: rec.seq,
                            reason: "trial-end cannot carry state running".into(),
                        })
                    }
                };
                study.tell(id, outcome).map_err(|e| wrap(rec, e))?;
                if let (Some(confusion), Some(f1)) = (&rec.confusion, &rec.f1) {
                    let k = f1.len().max(1);
                    metrics[id] = Some(ClassificationMetrics {
                        confusion: confusion.clone(),
                        f1: f1.clone(),
                        macro_f1: f1.iter().sum::<f64>() / k as f64,
                    });
                }
            }
            RecordKind::Checkpoint => {
                let id = field(rec.trial_id, rec, "trial_id")?;
                checkpoints.push((id, field(rec.value, rec, "value")?));
            }
        }
    }
    let interrupted = study
        .trials()
        .iter()
        .filter(|t| t.state == TrialState::Running)
        .map(|t| t.trial_id)
        .collect();
    Ok(Replay {
        study,
        config_hash,
        checkpoints,
        metrics,
        interrupted,
    })
}

/// Reads a journal and rebuilds its study; trials that never ended are
/// marked failed.
pub fn resume_study(path: &Path) -> Result<Study> {
    Ok(replay_finalized(&read_journal(path)?)?.study)
}

/// [`resume_study`] on in-memory journal bytes.
pub fn resume_from_bytes(bytes: &[u8]) -> Result<Study> {
    Ok(replay_finalized(&decode(bytes)?.0)?.study)
}

/// [`replay`] followed by failing every interrupted trial in memory.
pub fn replay_finalized(records: &[JournalRecord]) -> Result<Replay> {
    let mut r = replay(records)?;
    for &id in &r.interrupted {
        r.study.tell(id, Outcome::Failed)?;
    }
    Ok(r)
}

/// Opens a journal to continue its study. Interrupted trials are failed
/// both in memory and with a `trial-end` record.
pub fn reopen(path: &Path) -> Result<(Journal, Replay)> {
    let (mut journal, records) = Journal::open_append(path)?;
    let mut r = replay(&records)?;
    for id in std::mem::take(&mut r.interrupted) {
        r.study.tell(id, Outcome::Failed)?;
        journal.append_next(JournalRecord::trial_end(id, Outcome::Failed, None))?;
    }
    Ok((journal, r))
}
