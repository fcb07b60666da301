//! Median-rule pruning on intermediate learning curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Direction;
use crate::study::Study;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrunerConfig {
    /// Steps below this index are never pruned.
    pub warmup_steps: u64,
    /// Completed trials with a value at the step needed before pruning.
    pub min_completed: usize,
}

impl Default for PrunerConfig {
    fn default() -> Self {
        Self {
            warmup_steps: 2,
            min_completed: 3,
        }
    }
}

impl PrunerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_completed == 0 {
            return Err(Error::validation("pruner min_completed must be at least 1"));
        }
        Ok(())
    }
}

/// Median of a non-empty slice; even counts average the two middle values.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Whether `trial_id` should stop after reporting at `step`.
///
/// Prunes only when the trial's value at `step` is strictly worse than the
/// median of completed trials' values at the same step.
pub fn should_prune(
    study: &Study,
    trial_id: usize,
    step: u64,
    cfg: &PrunerConfig,
    direction: Direction,
) -> Result<bool> {
    let trial = study.trial(trial_id)?;
    let value = trial.intermediate_at(step).ok_or_else(|| {
        Error::Precondition(format!(
            "trial {trial_id} has no intermediate value at step {step}"
        ))
    })?;
    if step < cfg.warmup_steps {
        return Ok(false);
    }
    let mut peers: Vec<f64> = study
        .completed()
        .filter(|t| t.trial_id != trial_id)
        .filter_map(|t| t.intermediate_at(step))
        .collect();
    if peers.len() < cfg.min_completed {
        return Ok(false);
    }
    let m = median(&mut peers);
    Ok(direction.is_better(m, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RandomSampler;
    use crate::space::{Distribution, SearchSpace};
    use crate::study::Outcome;

    fn study_with_curves(direction: Direction, completed: &[f64]) -> Study {
        let space = SearchSpace::new()
            .with(
                "x",
                Distribution::Uniform {
                    low: 0.0,
                    high: 1.0,
                },
            )
            .unwrap();
        let mut s = Study::create(space, direction, 0).unwrap();
        for &v in completed {
            let id = s.ask(&RandomSampler).unwrap().trial_id;
            s.report_intermediate(id, 3, v).unwrap();
            s.tell(id, Outcome::Value(v)).unwrap();
        }
        s
    }

    fn running_at_3(s: &mut Study, v: f64) -> usize {
        let id = s.ask(&RandomSampler).unwrap().trial_id;
        s.report_intermediate(id, 3, v).unwrap();
        id
    }

    #[test]
    fn no_history_never_prunes() {
        let mut s = study_with_curves(Direction::Maximize, &[]);
        let id = running_at_3(&mut s, 0.0);
        assert!(!should_prune(&s, id, 3, &PrunerConfig::default(), Direction::Maximize).unwrap());
    }

    #[test]
    fn below_median_pruned_equal_survives() {
        let cfg = PrunerConfig::default();
        let mut s = study_with_curves(Direction::Maximize, &[0.6, 0.7, 0.8]);
        let id = running_at_3(&mut s, 0.65);
        assert!(should_prune(&s, id, 3, &cfg, Direction::Maximize).unwrap());
        let mut s = study_with_curves(Direction::Maximize, &[0.6, 0.7, 0.8]);
        let id = running_at_3(&mut s, 0.70);
        assert!(!should_prune(&s, id, 3, &cfg, Direction::Maximize).unwrap());
    }

    #[test]
    fn warmup_blocks_pruning() {
        let cfg = PrunerConfig {
            warmup_steps: 4,
            min_completed: 1,
        };
        let mut s = study_with_curves(Direction::Maximize, &[0.9, 0.9]);
        let id = running_at_3(&mut s, 0.1);
        assert!(!should_prune(&s, id, 3, &cfg, Direction::Maximize).unwrap());
    }

    #[test]
    fn missing_step_is_precondition_error() {
        let mut s = study_with_curves(Direction::Maximize, &[0.5]);
        let id = running_at_3(&mut s, 0.1);
        assert!(matches!(
            should_prune(&s, id, 5, &PrunerConfig::default(), Direction::Maximize),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn even_median_averages_middle_pair() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [5.0]), 5.0);
    }
}
