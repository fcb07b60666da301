//! Univariate tree-structured Parzen estimator.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Direction, ParamAssignment, ParamValue};
use crate::study::Study;

use super::parzen::{fit_parzen, CategoricalEstimator};
use super::random::suggest_random;
use super::{observations, Sampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    /// Complete trials required before the model replaces random search.
    pub n_startup_trials: usize,
    /// Candidates drawn from the good-set density per parameter.
    pub n_candidates: usize,
    /// Upper bound on the size of the good set.
    pub gamma_cap: usize,
    pub gamma_fraction: f64,
    /// Pseudo-count spread over the options of a discrete parameter.
    pub prior_weight: f64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup_trials: 10,
            n_candidates: 24,
            gamma_cap: 25,
            gamma_fraction: 0.25,
            prior_weight: 1.0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup_trials == 0 || self.n_candidates == 0 || self.gamma_cap == 0 {
            return Err(Error::validation(
                "TPE n_startup_trials, n_candidates and gamma_cap must be positive",
            ));
        }
        if !(self.gamma_fraction > 0.0 && self.gamma_fraction <= 1.0) {
            return Err(Error::validation(format!(
                "TPE gamma_fraction must be in (0, 1], got {}",
                self.gamma_fraction
            )));
        }
        if !(self.prior_weight > 0.0 && self.prior_weight.is_finite()) {
            return Err(Error::validation("TPE prior_weight must be positive"));
        }
        Ok(())
    }

    /// `min(gamma_cap, max(1, ceil(gamma_fraction * n)))`.
    pub fn n_good(&self, n: usize) -> usize {
        // Shave an epsilon so products like 0.1 * 30 do not round up.
        let raw = (self.gamma_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
        raw.max(1).min(self.gamma_cap)
    }
}

/// Indices into a history, split into the best `n_good` and the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TpeSplit {
    /// Best first; ties keep history order.
    pub good: Vec<usize>,
    /// In history order.
    pub bad: Vec<usize>,
}

pub fn split_observations(
    values: &[f64],
    direction: Direction,
    cfg: &TpeConfig,
) -> Result<TpeSplit> {
    if values.is_empty() {
        return Err(Error::Precondition(
            "TPE split needs a non-empty history".into(),
        ));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| direction.cmp_best_first(values[a], values[b]));
    let n_good = cfg.n_good(values.len());
    let good = order[..n_good].to_vec();
    let mut bad = order[n_good..].to_vec();
    bad.sort_unstable();
    Ok(TpeSplit { good, bad })
}

/// Proposes an assignment for the next trial of `study`.
pub fn tpe_suggest<R: Rng + ?Sized>(
    study: &Study,
    cfg: &TpeConfig,
    rng: &mut R,
) -> Result<ParamAssignment> {
    let space = study.space();
    if study.n_complete() < cfg.n_startup_trials {
        return suggest_random(space, rng);
    }
    let history = observations(study);
    let values: Vec<f64> = history.iter().map(|&(_, v)| v).collect();
    let split = split_observations(&values, study.direction(), cfg)?;

    let mut out = ParamAssignment::new();
    for (name, dist) in space.iter() {
        let column = |idx: &[usize]| -> Vec<&ParamValue> {
            idx.iter().filter_map(|&i| history[i].0.get(name)).collect()
        };
        let (good, bad) = (column(&split.good), column(&split.bad));
        let value = if let Some(domain) = match *dist {
            crate::space::Distribution::Uniform { low, high }
            | crate::space::Distribution::LogUniform { low, high } => Some((low, high)),
            _ => None,
        } {
            let raw = |vs: &[&ParamValue]| -> Vec<f64> {
                vs.iter()
                    .filter_map(|v| v.as_f64())
                    .filter(|x| (domain.0..=domain.1).contains(x))
                    .collect()
            };
            let l = fit_parzen(&raw(&good), domain, dist.is_log(), cfg)?;
            let g = fit_parzen(&raw(&bad), domain, dist.is_log(), cfg)?;
            let mut best = (f64::NEG_INFINITY, None);
            for _ in 0..cfg.n_candidates {
                let x = l.sample(rng);
                let score = l.log_pdf_unchecked(x) - g.log_pdf_unchecked(x);
                if best.1.is_none() || score > best.0 {
                    best = (score, Some(x));
                }
            }
            dist.from_internal(best.1.unwrap())
        } else {
            let k = dist.cardinality().unwrap();
            let idx = |vs: &[&ParamValue]| -> Vec<usize> {
                vs.iter().filter_map(|v| dist.choice_index(v)).collect()
            };
            let l = CategoricalEstimator::fit(&idx(&good), k, cfg.prior_weight)?;
            let g = CategoricalEstimator::fit(&idx(&bad), k, cfg.prior_weight)?;
            let mut best = (f64::NEG_INFINITY, None);
            for _ in 0..cfg.n_candidates {
                let i = l.sample(rng);
                let score = l.log_pmf(i) - g.log_pmf(i);
                if best.1.is_none() || score > best.0 {
                    best = (score, Some(i));
                }
            }
            dist.choice_value(best.1.unwrap()).unwrap()
        };
        out.insert(name, value);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct TpeSampler {
    pub config: TpeConfig,
}

impl TpeSampler {
    pub fn new(config: TpeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Sampler for TpeSampler {
    fn sample(&self, study: &Study, rng: &mut dyn RngCore) -> Result<ParamAssignment> {
        tpe_suggest(study, &self.config, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Distribution, SearchSpace};
    use crate::study::Outcome;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_takes_quarter_best() {
        let values = [0.1, 0.9, 0.3, 0.8, 0.2, 0.4, 0.5, 0.6];
        let s = split_observations(&values, Direction::Maximize, &TpeConfig::default()).unwrap();
        assert_eq!(s.good, vec![1, 3]);
        assert_eq!(s.bad, vec![0, 2, 4, 5, 6, 7]);
    }

    #[test]
    fn split_single_and_capped() {
        let cfg = TpeConfig::default();
        let s = split_observations(&[0.3], Direction::Minimize, &cfg).unwrap();
        assert_eq!((s.good.len(), s.bad.len()), (1, 0));
        let values: Vec<f64> = (0..200).map(f64::from).collect();
        let s = split_observations(&values, Direction::Minimize, &cfg).unwrap();
        assert_eq!(s.good.len(), 25);
        assert_eq!(s.good, (0..25).collect::<Vec<_>>());
        assert!(split_observations(&[], Direction::Minimize, &cfg).is_err());
    }

    #[test]
    fn split_ties_keep_trial_order() {
        let cfg = TpeConfig {
            gamma_fraction: 0.5,
            ..Default::default()
        };
        let s = split_observations(&[0.5, 0.7, 0.7, 0.7], Direction::Maximize, &cfg).unwrap();
        assert_eq!(s.good, vec![1, 2]);
    }

    #[test]
    fn n_good_avoids_float_round_up() {
        let cfg = TpeConfig {
            gamma_fraction: 0.1,
            ..Default::default()
        };
        assert_eq!(cfg.n_good(30), 3);
    }

    #[test]
    fn config_validation() {
        assert!(TpeConfig::default().validate().is_ok());
        assert!(TpeConfig {
            gamma_fraction: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TpeConfig {
            n_candidates: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn degenerate_history_stays_in_domain() {
        let space = SearchSpace::new()
            .with(
                "x",
                Distribution::Uniform {
                    low: 0.0,
                    high: 1.0,
                },
            )
            .unwrap();
        let mut study = Study::create(space, Direction::Minimize, 0).unwrap();
        let mut p = ParamAssignment::new();
        p.insert("x", ParamValue::Float(0.5));
        for i in 0..12 {
            study.start_trial_with(p.clone()).unwrap();
            study.tell(i, Outcome::Value(i as f64)).unwrap();
        }
        let cfg = TpeConfig::default();
        let est = fit_parzen(&[0.5, 0.5, 0.5], (0.0, 1.0), false, &cfg).unwrap();
        assert!(est.components()[..3].iter().all(|c| c.center == 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = tpe_suggest(&study, &cfg, &mut rng)
                .unwrap()
                .get_f64("x")
                .unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let space = SearchSpace::new()
            .with(
                "x",
                Distribution::Uniform {
                    low: 0.0,
                    high: 1.0,
                },
            )
            .unwrap()
            .with(
                "b",
                Distribution::IntChoice {
                    choices: vec![8, 16, 32],
                },
            )
            .unwrap();
        let mut study = Study::create(space, Direction::Minimize, 3).unwrap();
        let sampler = TpeSampler::default();
        for i in 0..15 {
            let x = study.ask(&sampler).unwrap().params.get_f64("x").unwrap();
            study.tell(i, Outcome::Value((x - 0.3).powi(2))).unwrap();
        }
        let a = tpe_suggest(&study, &sampler.config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = tpe_suggest(&study, &sampler.config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }
}
