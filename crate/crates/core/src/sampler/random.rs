use rand::{Rng, RngCore};

use crate::error::Result;
use crate::space::{Distribution, ParamAssignment, ParamValue, SearchSpace};
use crate::study::Study;

use super::Sampler;

/// Draws every parameter independently from its domain.
pub fn suggest_random<R: Rng + ?Sized>(
    space: &SearchSpace,
    rng: &mut R,
) -> Result<ParamAssignment> {
    space.validate()?;
    Ok(space
        .iter()
        .map(|(name, dist)| (name.to_string(), sample_one(dist, rng)))
        .collect())
}

pub(crate) fn sample_one<R: Rng + ?Sized>(dist: &Distribution, rng: &mut R) -> ParamValue {
    match *dist {
        Distribution::Uniform { low, high } => ParamValue::Float(rng.random_range(low..=high)),
        Distribution::LogUniform { low, high } => {
            let x = rng.random_range(low.ln()..=high.ln());
            ParamValue::Float(x.exp().clamp(low, high))
        }
        _ => {
            let n = dist.cardinality().expect("discrete distribution");
            dist.choice_value(rng.random_range(0..n)).unwrap()
        }
    }
}

/// Random search.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSampler;

impl Sampler for RandomSampler {
    fn sample(&self, study: &Study, rng: &mut dyn RngCore) -> Result<ParamAssignment> {
        suggest_random(study.space(), rng)
    }
}
