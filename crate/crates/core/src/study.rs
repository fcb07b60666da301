//! Study and trial records with the ask/tell lifecycle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Sampler;
use crate::space::{Direction, ParamAssignment, SearchSpace};

/// Random-stream tags used with [`derive_rng`].
pub mod streams {
    pub const SAMPLER: u64 = 1;
    pub const OBJECTIVE: u64 = 2;
    pub const DATA: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed with a path of integers into an independent seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn derive_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialState {
    Running,
    Complete,
    Pruned,
    Failed,
}

impl TrialState {
    pub fn is_finished(self) -> bool {
        self != TrialState::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrialState::Running => "running",
            TrialState::Complete => "complete",
            TrialState::Pruned => "pruned",
            TrialState::Failed => "failed",
        }
    }
}

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Value(f64),
    Pruned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub params: ParamAssignment,
    pub state: TrialState,
    pub final_value: Option<f64>,
    pub intermediates: Vec<(u64, f64)>,
}

impl TrialRecord {
    pub fn intermediate_at(&self, step: u64) -> Option<f64> {
        self.intermediates
            .binary_search_by_key(&step, |&(s, _)| s)
            .ok()
            .map(|i| self.intermediates[i].1)
    }

    pub fn last_intermediate(&self) -> Option<(u64, f64)> {
        self.intermediates.last().copied()
    }
}

/// One optimization campaign over a fixed space and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    space: SearchSpace,
    direction: Direction,
    seed: u64,
    trials: Vec<TrialRecord>,
}

impl Study {
    pub fn create(space: SearchSpace, direction: Direction, seed: u64) -> Result<Self> {
        space.validate()?;
        Ok(Self {
            space,
            direction,
            seed,
            trials: Vec::new(),
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn trial(&self, trial_id: usize) -> Result<&TrialRecord> {
        self.trials.get(trial_id).ok_or_else(|| Error::State {
            trial_id,
            reason: "unknown trial id".into(),
        })
    }

    pub fn n_complete(&self) -> usize {
        self.completed().count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials
            .iter()
            .filter(|t| t.state == TrialState::Complete)
    }

    /// Proposes parameters for a new trial and appends it as running.
    ///
    /// The sampler's randomness is derived from the study seed and the new
    /// trial id, so replaying the same calls reproduces the same study.
    pub fn ask(&mut self, sampler: &dyn Sampler) -> Result<&TrialRecord> {
        let trial_id = self.trials.len();
        let mut rng = derive_rng(self.seed, &[streams::SAMPLER, trial_id as u64]);
        let params = sampler.sample(self, &mut rng)?;
        self.start_trial_with(params)
    }

    /// Appends a running trial with caller-chosen parameters.
    pub fn start_trial_with(&mut self, params: ParamAssignment) -> Result<&TrialRecord> {
        self.space.check_assignment(&params)?;
        let trial_id = self.trials.len();
        self.trials.push(TrialRecord {
            trial_id,
            params,
            state: TrialState::Running,
            final_value: None,
            intermediates: Vec::new(),
        });
        Ok(&self.trials[trial_id])
    }

    fn running_mut(&mut self, trial_id: usize) -> Result<&mut TrialRecord> {
        let trial = self.trials.get_mut(trial_id).ok_or_else(|| Error::State {
            trial_id,
            reason: "unknown trial id".into(),
        })?;
        if trial.state != TrialState::Running {
            return Err(Error::State {
                trial_id,
                reason: format!("trial is {}, expected running", trial.state.as_str()),
            });
        }
        Ok(trial)
    }

    pub fn tell(&mut self, trial_id: usize, outcome: Outcome) -> Result<&TrialRecord> {
        if let Outcome::Value(v) = outcome {
            if !v.is_finite() {
                return Err(Error::validation(format!(
                    "trial {trial_id}: final value must be finite, got {v}"
                )));
            }
        }
        let trial = self.running_mut(trial_id)?;
        match outcome {
            Outcome::Value(v) => {
                trial.state = TrialState::Complete;
                trial.final_value = Some(v);
            }
            Outcome::Pruned => trial.state = TrialState::Pruned,
            Outcome::Failed => trial.state = TrialState::Failed,
        }
        Ok(trial)
    }

    pub fn report_intermediate(&mut self, trial_id: usize, step: u64, value: f64) -> Result<()> {
        let trial = self.running_mut(trial_id)?;
        if let Some((last, _)) = trial.last_intermediate() {
            if step <= last {
                return Err(Error::Ordering {
                    trial_id,
                    step,
                    last,
                });
            }
        }
        trial.intermediates.push((step, value));
        Ok(())
    }

    /// The complete trial with the best final value; ties go to the lowest id.
    pub fn best_trial(&self) -> Result<&TrialRecord> {
        let mut best: Option<&TrialRecord> = None;
        for t in self.completed() {
            let v = t.final_value.expect("complete trials carry a value");
            match best {
                Some(b) if !self.direction.is_better(v, b.final_value.unwrap()) => {}
                _ => best = Some(t),
            }
        }
        best.ok_or(Error::NoCompletedTrials)
    }
}
