//! Objectives a study can optimize.

use std::ops::ControlFlow;

use crate::error::Result;
use crate::space::ParamAssignment;
use crate::surrogate::{
    train_and_evaluate, Benchmark, ClassificationMetrics, Dataset, Hyperparams, TrainSettings,
};

/// Callback an objective uses to publish intermediate values. `Break`
/// means the trial should stop now.
pub type Reporter<'a> = dyn FnMut(u64, f64) -> ControlFlow<()> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub metrics: Option<ClassificationMetrics>,
}

impl Evaluation {
    pub fn value(value: f64) -> Self {
        Self {
            value,
            metrics: None,
        }
    }
}

pub trait Objective: Send + Sync {
    /// Evaluates one assignment. `seed` is unique to the trial.
    fn evaluate(
        &self,
        params: &ParamAssignment,
        seed: u64,
        report: &mut Reporter<'_>,
    ) -> Result<Evaluation>;
}

/// Adapts a plain `params -> value` function.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&ParamAssignment) -> Result<f64> + Send + Sync,
{
    fn evaluate(
        &self,
        params: &ParamAssignment,
        _seed: u64,
        _report: &mut Reporter<'_>,
    ) -> Result<Evaluation> {
        (self.0)(params).map(Evaluation::value)
    }
}

impl Objective for Benchmark {
    fn evaluate(
        &self,
        params: &ParamAssignment,
        _seed: u64,
        _report: &mut Reporter<'_>,
    ) -> Result<Evaluation> {
        Benchmark::evaluate(*self, params).map(Evaluation::value)
    }
}

/// Trains the surrogate classifier and scores final validation accuracy,
/// reporting accuracy after every epoch.
#[derive(Debug, Clone)]
pub struct SurrogateObjective {
    pub train: Dataset,
    pub val: Dataset,
    pub epochs: usize,
    pub hidden_dim: usize,
}

impl Objective for SurrogateObjective {
    fn evaluate(
        &self,
        params: &ParamAssignment,
        seed: u64,
        report: &mut Reporter<'_>,
    ) -> Result<Evaluation> {
        let hp = Hyperparams::from_assignment(params)?;
        let settings = TrainSettings {
            epochs: self.epochs,
            hidden_dim: self.hidden_dim,
            seed,
        };
        let r = train_and_evaluate(&hp, &self.train, &self.val, &settings, report)?;
        Ok(Evaluation {
            value: r.final_accuracy,
            metrics: Some(r.metrics),
        })
    }
}
