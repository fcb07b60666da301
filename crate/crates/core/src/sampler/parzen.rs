//! Density models used by TPE: a truncated-Gaussian Parzen mixture for
//! continuous parameters and a smoothed histogram for discrete ones.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

use super::tpe::TpeConfig;

/// Standard normal CDF.
fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile.
fn norm_ppf(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Probability mass of a standard normal on `[za, zb]`, computed on the
/// side of zero that keeps precision.
fn norm_mass(za: f64, zb: f64) -> f64 {
    if za >= 0.0 {
        norm_cdf(-za) - norm_cdf(-zb)
    } else if zb <= 0.0 {
        norm_cdf(zb) - norm_cdf(za)
    } else {
        1.0 - norm_cdf(-zb) - norm_cdf(za)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub center: f64,
    pub bandwidth: f64,
    pub weight: f64,
}

/// Mixture of Gaussians truncated to `[low, high]`.
///
/// For log-scaled parameters the mixture lives in natural-log space: `low`,
/// `high`, centers, [`ParzenEstimator::log_pdf`] and
/// [`ParzenEstimator::sample`] all use log coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ParzenEstimator {
    components: Vec<Component>,
    low: f64,
    high: f64,
    is_log: bool,
    log_mass: Vec<f64>,
}

/// Fits one component per observation plus a domain-wide prior component.
///
/// `values` and `domain` are given in parameter units; with `is_log` they
/// are mapped through `ln` before fitting.
pub fn fit_parzen(
    values: &[f64],
    domain: (f64, f64),
    is_log: bool,
    _cfg: &TpeConfig,
) -> Result<ParzenEstimator> {
    let (raw_low, raw_high) = domain;
    if raw_low >= raw_high || !raw_low.is_finite() || !raw_high.is_finite() {
        return Err(Error::validation(format!(
            "invalid domain [{raw_low}, {raw_high}]"
        )));
    }
    if is_log && raw_low <= 0.0 {
        return Err(Error::validation("log domain requires low > 0"));
    }
    if let Some(v) = values.iter().find(|v| !(raw_low..=raw_high).contains(*v)) {
        return Err(Error::validation(format!(
            "observation {v} lies outside [{raw_low}, {raw_high}]"
        )));
    }
    let map = |v: f64| if is_log { v.ln() } else { v };
    let (low, high) = (map(raw_low), map(raw_high));
    let width = high - low;
    let xs: Vec<f64> = values.iter().map(|&v| map(v).clamp(low, high)).collect();

    let n = xs.len();
    let weight = 1.0 / (n + 1) as f64;
    let mut components = Vec::with_capacity(n + 1);
    if n > 0 {
        let bandwidth = observation_bandwidth(&xs, width);
        components.extend(xs.iter().map(|&center| Component {
            center,
            bandwidth,
            weight,
        }));
    }
    components.push(Component {
        center: low + 0.5 * width,
        bandwidth: width,
        weight,
    });
    Ok(ParzenEstimator::from_components(
        components, low, high, is_log,
    ))
}

/// `max(1.06 * sd * n^(-1/5), width / 100)`, with `width / 2` standing in
/// for the spread of a single observation. `sd` uses the n-1 denominator.
fn observation_bandwidth(xs: &[f64], width: f64) -> f64 {
    let n = xs.len();
    let floor = width / 100.0;
    if n == 1 {
        return (width / 2.0).max(floor);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (1.06 * var.sqrt() * (n as f64).powf(-0.2)).max(floor)
}

impl ParzenEstimator {
    /// Builds a mixture from explicit components in modelling coordinates.
    pub fn from_components(components: Vec<Component>, low: f64, high: f64, is_log: bool) -> Self {
        let log_mass = components
            .iter()
            .map(|c| {
                norm_mass(
                    (low - c.center) / c.bandwidth,
                    (high - c.center) / c.bandwidth,
                )
                .ln()
            })
            .collect();
        Self {
            components,
            low,
            high,
            is_log,
            log_mass,
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Domain in modelling coordinates.
    pub fn domain(&self) -> (f64, f64) {
        (self.low, self.high)
    }

    pub fn is_log(&self) -> bool {
        self.is_log
    }

    /// Log density of the truncation-renormalized mixture at `x`.
    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        if !(self.low..=self.high).contains(&x) {
            return Err(Error::validation(format!(
                "{x} lies outside [{}, {}]",
                self.low, self.high
            )));
        }
        Ok(self.log_pdf_unchecked(x))
    }

    pub(crate) fn log_pdf_unchecked(&self, x: f64) -> f64 {
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_mass)
            .map(|(c, lm)| {
                let z = (x - c.center) / c.bandwidth;
                c.weight.ln() - c.bandwidth.ln() - half_ln_2pi - 0.5 * z * z - lm
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws one point in modelling coordinates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().unwrap();
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let za = (self.low - chosen.center) / chosen.bandwidth;
        let zb = (self.high - chosen.center) / chosen.bandwidth;
        let v: f64 = rng.random();
        // Sample on whichever tail keeps the CDF away from 1.
        let z = if za >= 0.0 {
            let (pa, pb) = (norm_cdf(-zb), norm_cdf(-za));
            -norm_ppf(pa + v * (pb - pa))
        } else {
            let (pa, pb) = (norm_cdf(za), norm_cdf(zb));
            norm_ppf(pa + v * (pb - pa))
        };
        (chosen.center + chosen.bandwidth * z).clamp(self.low, self.high)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Smoothed categorical distribution: `p_i ∝ count_i + prior_weight / k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalEstimator {
    probs: Vec<f64>,
}

impl CategoricalEstimator {
    pub fn fit(indices: &[usize], n_choices: usize, prior_weight: f64) -> Result<Self> {
        if n_choices == 0 {
            return Err(Error::validation(
                "categorical estimator needs at least one choice",
            ));
        }
        let mut weights = vec![prior_weight / n_choices as f64; n_choices];
        for &i in indices {
            *weights
                .get_mut(i)
                .ok_or_else(|| Error::validation(format!("choice index {i} out of range")))? += 1.0;
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_pmf(&self, index: usize) -> f64 {
        self.probs[index].ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}
