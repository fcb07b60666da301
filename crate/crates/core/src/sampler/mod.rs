//! Samplers propose parameter assignments for new trials.

mod grid;
pub mod parzen;
mod random;
mod tpe;

use rand::RngCore;

use crate::error::Result;
use crate::space::ParamAssignment;
use crate::study::{Study, TrialState};

pub use grid::{grid_enumerate, GridSampler};
pub use parzen::{fit_parzen, CategoricalEstimator, ParzenEstimator};
pub use random::{suggest_random, RandomSampler};
pub use tpe::{split_observations, tpe_suggest, TpeConfig, TpeSampler, TpeSplit};

/// Proposes the parameters for the next trial of a study.
///
/// Implementations are pure in `(study, rng)`: the new trial's id is
/// `study.trials().len()`.
pub trait Sampler: Send + Sync {
    fn sample(&self, study: &Study, rng: &mut dyn RngCore) -> Result<ParamAssignment>;
}

/// Observations a model-based sampler learns from.
///
/// Complete trials contribute their final value. Pruned trials contribute
/// their last intermediate value; failed and running trials are skipped.
pub fn observations(study: &Study) -> Vec<(&ParamAssignment, f64)> {
    study
        .trials()
        .iter()
        .filter_map(|t| match t.state {
            TrialState::Complete => t.final_value.map(|v| (&t.params, v)),
            TrialState::Pruned => t.last_intermediate().map(|(_, v)| (&t.params, v)),
            _ => None,
        })
        .collect()
}
