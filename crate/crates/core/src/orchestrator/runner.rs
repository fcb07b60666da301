//! The ask → evaluate → tell loop with pruning, thresholds and workers.

use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pruner::{should_prune, PrunerConfig};
use crate::sampler::Sampler;
use crate::space::{Direction, ParamAssignment};
use crate::study::{derive_seed, streams, Outcome, Study};
use crate::surrogate::ClassificationMetrics;

use super::journal::{Journal, JournalRecord};
use super::objective::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPolicy {
    pub n_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub save_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_threshold: Option<f64>,
    #[serde(default = "one")]
    pub max_parallel: usize,
    /// Derived from the presence of a pruner in the experiment config.
    #[serde(skip)]
    pub pruning_enabled: bool,
}

fn one() -> usize {
    1
}

impl RunPolicy {
    pub fn new(n_trials: usize) -> Self {
        Self {
            n_trials,
            save_threshold: None,
            stop_threshold: None,
            max_parallel: 1,
            pruning_enabled: false,
        }
    }

    pub fn validate(&self, direction: Direction) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::validation("policy.n_trials must be at least 1"));
        }
        if self.max_parallel == 0 {
            return Err(Error::validation("policy.max_parallel must be at least 1"));
        }
        for (key, t) in [
            ("save_threshold", self.save_threshold),
            ("stop_threshold", self.stop_threshold),
        ] {
            if t.is_some_and(|t| !t.is_finite()) {
                return Err(Error::validation(format!("policy.{key} must be finite")));
            }
        }
        if let (Some(save), Some(stop)) = (self.save_threshold, self.stop_threshold) {
            if !direction.reaches(stop, save) {
                return Err(Error::validation(format!(
                    "policy.stop_threshold {stop} must not be below policy.save_threshold {save} when direction is {direction}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `n_trials` trials exist.
    Budget,
    /// A completed value reached the stop threshold.
    Threshold,
    /// The stop flag was raised.
    Interrupted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub study: Study,
    pub stop_reason: StopReason,
    /// `(trial_id, value)` of each checkpoint written during this run.
    pub checkpoints: Vec<(usize, f64)>,
    /// Validation metrics of completed trials evaluated in this run.
    pub metrics: Vec<(usize, ClassificationMetrics)>,
}

/// Everything a run needs besides the study and journal.
pub struct RunContext<'a> {
    pub sampler: &'a dyn Sampler,
    pub objective: &'a dyn Objective,
    pub policy: &'a RunPolicy,
    pub pruner: Option<&'a PrunerConfig>,
    /// Raised externally (e.g. on SIGINT) to stop launching trials and
    /// interrupt running ones at their next report.
    pub stop: Option<&'a AtomicBool>,
}

struct Shared {
    study: Study,
    journal: Journal,
    halt: Option<StopReason>,
    error: Option<Error>,
    checkpoints: Vec<(usize, f64)>,
    metrics: Vec<(usize, ClassificationMetrics)>,
}

impl Shared {
    fn fail(&mut self, e: Error) {
        if self.error.is_none() {
            self.error = Some(e);
        }
    }
}

enum Interrupt {
    Pruned,
    Stopped,
    NonFinite,
    Fatal(Error),
}

/// Runs trials until the budget is spent, a threshold halts the study, the
/// stop flag is raised, or an unrecoverable error occurs. The journal must
/// already describe `study`.
///
/// With `max_parallel = 1` everything happens on the calling thread and the
/// run is deterministic in the study seed.
pub fn run_study(study: Study, journal: Journal, ctx: &RunContext<'_>) -> Result<RunSummary> {
    ctx.policy.validate(study.direction())?;
    if let Some(p) = ctx.pruner {
        p.validate()?;
    }
    let shared = Mutex::new(Shared {
        study,
        journal,
        halt: None,
        error: None,
        checkpoints: Vec::new(),
        metrics: Vec::new(),
    });
    if ctx.policy.max_parallel == 1 {
        worker(&shared, ctx);
    } else {
        std::thread::scope(|s| {
            for _ in 0..ctx.policy.max_parallel {
                s.spawn(|| worker(&shared, ctx));
            }
        });
    }
    let shared = shared.into_inner().unwrap_or_else(|p| p.into_inner());
    if let Some(e) = shared.error {
        return Err(e);
    }
    Ok(RunSummary {
        study: shared.study,
        stop_reason: shared.halt.unwrap_or(StopReason::Budget),
        checkpoints: shared.checkpoints,
        metrics: shared.metrics,
    })
}

fn stop_requested(ctx: &RunContext<'_>) -> bool {
    ctx.stop.is_some_and(|s| s.load(Ordering::SeqCst))
}

fn lock<'m>(m: &'m Mutex<Shared>) -> std::sync::MutexGuard<'m, Shared> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn next_trial(
    shared: &Mutex<Shared>,
    ctx: &RunContext<'_>,
) -> Option<(usize, ParamAssignment, u64)> {
    let mut g = lock(shared);
    if g.error.is_some() || g.halt.is_some() {
        return None;
    }
    if stop_requested(ctx) {
        g.halt = Some(StopReason::Interrupted);
        return None;
    }
    if g.study.trials().len() >= ctx.policy.n_trials {
        return None;
    }
    let (id, params) = match g.study.ask(ctx.sampler) {
        Ok(t) => (t.trial_id, t.params.clone()),
        Err(e) => {
            g.fail(e);
            return None;
        }
    };
    if let Err(e) = g
        .journal
        .append_next(JournalRecord::trial_start(id, &params))
    {
        g.fail(e);
        return None;
    }
    let seed = derive_seed(g.study.seed(), &[streams::OBJECTIVE, id as u64]);
    Some((id, params, seed))
}

fn report(
    shared: &Mutex<Shared>,
    ctx: &RunContext<'_>,
    id: usize,
    step: u64,
    value: f64,
) -> Option<Interrupt> {
    if stop_requested(ctx) {
        return Some(Interrupt::Stopped);
    }
    if !value.is_finite() {
        return Some(Interrupt::NonFinite);
    }
    let mut g = lock(shared);
    if g.error.is_some() {
        return Some(Interrupt::Stopped);
    }
    if let Err(e) = g.study.report_intermediate(id, step, value) {
        return Some(Interrupt::Fatal(e));
    }
    if let Err(e) = g
        .journal
        .append_next(JournalRecord::intermediate(id, step, value))
    {
        return Some(Interrupt::Fatal(e));
    }
    let pruner = ctx.pruner.filter(|_| ctx.policy.pruning_enabled)?;
    let direction = g.study.direction();
    match should_prune(&g.study, id, step, pruner, direction) {
        Ok(true) => Some(Interrupt::Pruned),
        Ok(false) => None,
        Err(e) => Some(Interrupt::Fatal(e)),
    }
}

fn worker(shared: &Mutex<Shared>, ctx: &RunContext<'_>) {
    while let Some((id, params, seed)) = next_trial(shared, ctx) {
        let mut interrupt = None;
        let result = ctx.objective.evaluate(&params, seed, &mut |step, value| {
            if interrupt.is_some() {
                return ControlFlow::Break(());
            }
            interrupt = report(shared, ctx, id, step, value);
            if interrupt.is_some() {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });

        let mut g = lock(shared);
        let mut fatal = None;
        let (outcome, metrics) = match (interrupt, result) {
            (Some(Interrupt::Fatal(e)), _) => {
                // The journal may be unwritable; leave the trial mid-flight.
                g.fail(e);
                return;
            }
            (Some(Interrupt::Pruned), _) => (Outcome::Pruned, None),
            (Some(Interrupt::Stopped), _) => {
                if g.halt.is_none() && g.error.is_none() {
                    g.halt = Some(StopReason::Interrupted);
                }
                (Outcome::Failed, None)
            }
            (Some(Interrupt::NonFinite), _) => (Outcome::Failed, None),
            (None, Ok(eval)) if eval.value.is_finite() => {
                (Outcome::Value(eval.value), eval.metrics)
            }
            (None, Ok(_)) | (None, Err(Error::Divergence(_))) => (Outcome::Failed, None),
            (None, Err(e)) => {
                fatal = Some(e);
                (Outcome::Failed, None)
            }
        };
        if let Err(e) = finish(&mut g, ctx, id, outcome, metrics) {
            g.fail(e);
            return;
        }
        if let Some(e) = fatal {
            g.fail(e);
            return;
        }
    }
}

fn finish(
    g: &mut Shared,
    ctx: &RunContext<'_>,
    id: usize,
    outcome: Outcome,
    metrics: Option<ClassificationMetrics>,
) -> Result<()> {
    let direction = g.study.direction();
    let prior_best = g.study.best_trial().ok().and_then(|t| t.final_value);
    g.study.tell(id, outcome)?;
    g.journal
        .append_next(JournalRecord::trial_end(id, outcome, metrics.as_ref()))?;
    if let Some(m) = metrics {
        g.metrics.push((id, m));
    }
    let Outcome::Value(v) = outcome else {
        return Ok(());
    };
    if let Some(save) = ctx.policy.save_threshold {
        let improves = prior_best.is_none_or(|b| direction.is_better(v, b));
        if direction.reaches(v, save) && improves {
            let params = g.study.trial(id)?.params.clone();
            g.journal
                .append_next(JournalRecord::checkpoint(id, v, &params))?;
            g.checkpoints.push((id, v));
        }
    }
    if ctx
        .policy
        .stop_threshold
        .is_some_and(|stop| direction.reaches(v, stop))
        && g.halt.is_none()
    {
        g.halt = Some(StopReason::Threshold);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::journal::{read_journal, resume_study, RecordKind};
    use crate::orchestrator::objective::{Evaluation, FnObjective, Reporter};
    use crate::sampler::{RandomSampler, TpeSampler};
    use crate::space::{Distribution, SearchSpace};
    use crate::study::TrialState;

    fn unit_space() -> SearchSpace {
        SearchSpace::new()
            .with(
                "x",
                Distribution::Uniform {
                    low: 0.0,
                    high: 1.0,
                },
            )
            .unwrap()
    }

    fn start(dir: &std::path::Path, direction: Direction) -> (Study, Journal) {
        let study = Study::create(unit_space(), direction, 1).unwrap();
        let mut j = Journal::create(&dir.join("journal.jsonl")).unwrap();
        j.append_next(JournalRecord::study_meta(
            study.space(),
            direction,
            1,
            "test",
        ))
        .unwrap();
        (study, j)
    }

    fn ctx<'a>(obj: &'a dyn Objective, policy: &'a RunPolicy) -> RunContext<'a> {
        RunContext {
            sampler: &RandomSampler,
            objective: obj,
            policy,
            pruner: None,
            stop: None,
        }
    }

    #[test]
    fn stop_threshold_halts_after_one_trial() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Maximize);
        let obj = FnObjective(|_: &ParamAssignment| Ok(0.9));
        let policy = RunPolicy {
            stop_threshold: Some(0.85),
            ..RunPolicy::new(10)
        };
        let r = run_study(study, j, &ctx(&obj, &policy)).unwrap();
        assert_eq!(r.study.trials().len(), 1);
        assert_eq!(r.stop_reason, StopReason::Threshold);
    }

    #[test]
    fn five_trials_best_is_argmax() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Maximize);
        let obj = FnObjective(|p: &ParamAssignment| Ok(p.get_f64("x").unwrap()));
        let policy = RunPolicy::new(5);
        let r = run_study(study, j, &ctx(&obj, &policy)).unwrap();
        assert_eq!(r.study.n_complete(), 5);
        let best = r.study.best_trial().unwrap();
        let max = r
            .study
            .trials()
            .iter()
            .map(|t| t.final_value.unwrap())
            .fold(f64::MIN, f64::max);
        assert_eq!(best.final_value, Some(max));
        let replayed = resume_study(&dir.path().join("journal.jsonl")).unwrap();
        assert_eq!(replayed, r.study);
    }

    #[test]
    fn checkpoints_strictly_improve() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Maximize);
        let obj = FnObjective(|p: &ParamAssignment| Ok(p.get_f64("x").unwrap()));
        let policy = RunPolicy {
            save_threshold: Some(0.2),
            ..RunPolicy::new(30)
        };
        let r = run_study(study, j, &ctx(&obj, &policy)).unwrap();
        assert!(!r.checkpoints.is_empty());
        assert!(r.checkpoints.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(r.checkpoints.iter().all(|c| c.1 >= 0.2));
        let recs = read_journal(&dir.path().join("journal.jsonl")).unwrap();
        let n = recs
            .iter()
            .filter(|r| r.kind == RecordKind::Checkpoint)
            .count();
        assert_eq!(n, r.checkpoints.len());
    }

    #[test]
    fn divergence_fails_trial_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Minimize);
        let obj = FnObjective(|p: &ParamAssignment| {
            let x = p.get_f64("x").unwrap();
            if x < 0.5 {
                Err(Error::Divergence("boom".into()))
            } else {
                Ok(x)
            }
        });
        let policy = RunPolicy::new(8);
        let r = run_study(study, j, &ctx(&obj, &policy)).unwrap();
        assert_eq!(r.study.trials().len(), 8);
        assert!(r
            .study
            .trials()
            .iter()
            .any(|t| t.state == TrialState::Failed));
    }

    struct Curve;

    impl Objective for Curve {
        fn evaluate(
            &self,
            p: &ParamAssignment,
            _seed: u64,
            report: &mut Reporter<'_>,
        ) -> Result<Evaluation> {
            let x = p.get_f64("x").unwrap();
            for step in 1..=5 {
                if report(step, x * step as f64).is_break() {
                    return Ok(Evaluation::value(x));
                }
            }
            Ok(Evaluation::value(x * 5.0))
        }
    }

    #[test]
    fn pruning_marks_trials_and_journals_intermediates() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Maximize);
        let policy = RunPolicy {
            pruning_enabled: true,
            ..RunPolicy::new(25)
        };
        let pruner = PrunerConfig::default();
        let c = RunContext {
            pruner: Some(&pruner),
            ..ctx(&Curve, &policy)
        };
        let r = run_study(study, j, &c).unwrap();
        let pruned: Vec<_> = r
            .study
            .trials()
            .iter()
            .filter(|t| t.state == TrialState::Pruned)
            .collect();
        assert!(!pruned.is_empty());
        assert!(pruned
            .iter()
            .all(|t| t.intermediates.len() < 5 && t.intermediates.len() >= 2));
        assert_eq!(
            resume_study(&dir.path().join("journal.jsonl")).unwrap(),
            r.study
        );
    }

    #[test]
    fn stop_flag_interrupts() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Maximize);
        let flag = AtomicBool::new(false);
        let obj = FnObjective(|_: &ParamAssignment| {
            flag.store(true, Ordering::SeqCst);
            Ok(0.5)
        });
        let policy = RunPolicy::new(10);
        let c = RunContext {
            stop: Some(&flag),
            ..ctx(&obj, &policy)
        };
        let r = run_study(study, j, &c).unwrap();
        assert_eq!(r.stop_reason, StopReason::Interrupted);
        assert_eq!(r.study.trials().len(), 1);
    }

    #[test]
    fn parallel_workers_produce_gapless_journal() {
        let dir = tempfile::tempdir().unwrap();
        let (study, j) = start(dir.path(), Direction::Maximize);
        let policy = RunPolicy {
            max_parallel: 4,
            ..RunPolicy::new(40)
        };
        let c = RunContext {
            sampler: &TpeSampler::default(),
            ..ctx(&Curve, &policy)
        };
        let r = run_study(study, j, &c).unwrap();
        assert_eq!(r.study.n_complete(), 40);
        let recs = read_journal(&dir.path().join("journal.jsonl")).unwrap();
        assert!(recs.iter().enumerate().all(|(i, r)| r.seq == i as u64));
        assert_eq!(recs.len(), 1 + 40 * 7);
    }

    #[test]
    fn invalid_policy_rejected() {
        let p = RunPolicy {
            save_threshold: Some(0.9),
            stop_threshold: Some(0.8),
            ..RunPolicy::new(3)
        };
        assert!(p.validate(Direction::Maximize).is_err());
        assert!(p.validate(Direction::Minimize).is_ok());
        assert!(RunPolicy::new(0).validate(Direction::Maximize).is_err());
    }
}
