use rand::RngCore;

use crate::error::{Error, Result};
use crate::space::{Distribution, ParamAssignment, ParamValue, SearchSpace};
use crate::study::Study;

use super::Sampler;

fn axis_values(dist: &Distribution, resolution: usize) -> Vec<ParamValue> {
    let even = |lo: f64, hi: f64, i: usize| {
        if i == 0 {
            lo
        } else if i == resolution - 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (resolution - 1) as f64
        }
    };
    match *dist {
        Distribution::Uniform { low, high } => (0..resolution)
            .map(|i| ParamValue::Float(even(low, high, i)))
            .collect(),
        Distribution::LogUniform { low, high } => (0..resolution)
            .map(|i| {
                let v = match i {
                    0 => low,
                    i if i == resolution - 1 => high,
                    i => even(low.ln(), high.ln(), i).exp().clamp(low, high),
                };
                ParamValue::Float(v)
            })
            .collect(),
        _ => (0..dist.cardinality().unwrap())
            .map(|i| dist.choice_value(i).unwrap())
            .collect(),
    }
}

/// Cartesian product of the per-axis grids, row-major in space order (the
/// last parameter varies fastest).
pub fn grid_enumerate(space: &SearchSpace, resolution: usize) -> Result<Vec<ParamAssignment>> {
    if space.is_empty() {
        return Err(Error::validation(
            "cannot enumerate a grid over an empty space",
        ));
    }
    space.validate()?;
    if resolution < 2 && space.iter().any(|(_, d)| d.is_continuous()) {
        return Err(Error::validation(format!(
            "grid resolution must be at least 2 for continuous parameters, got {resolution}"
        )));
    }
    let axes: Vec<(&str, Vec<ParamValue>)> = space
        .iter()
        .map(|(name, d)| (name, axis_values(d, resolution)))
        .collect();
    let total: usize = axes.iter().map(|(_, a)| a.len()).product();
    let mut out = Vec::with_capacity(total);
    for mut cell in 0..total {
        let mut idx = vec![0; axes.len()];
        for (k, (_, values)) in axes.iter().enumerate().rev() {
            idx[k] = cell % values.len();
            cell /= values.len();
        }
        out.push(
            axes.iter()
                .zip(&idx)
                .map(|((name, values), &i)| (name.to_string(), values[i].clone()))
                .collect(),
        );
    }
    Ok(out)
}

/// Visits grid cells in enumeration order, one per trial.
#[derive(Debug, Clone)]
pub struct GridSampler {
    cells: Vec<ParamAssignment>,
}

impl GridSampler {
    pub fn new(space: &SearchSpace, resolution: usize) -> Result<Self> {
        Ok(Self {
            cells: grid_enumerate(space, resolution)?,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

impl Sampler for GridSampler {
    fn sample(&self, study: &Study, _rng: &mut dyn RngCore) -> Result<ParamAssignment> {
        self.cells
            .get(study.trials().len())
            .cloned()
            .ok_or(Error::Exhausted(self.cells.len()))
    }
}
