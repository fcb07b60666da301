//! Search-space model: per-parameter domains and concrete assignments.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the study seeks larger or smaller metric values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// True when `a` is strictly better than `b`.
    pub fn is_better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// True when `value` reaches `threshold` in the direction of improvement.
    pub fn reaches(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::Maximize => value >= threshold,
            Direction::Minimize => value <= threshold,
        }
    }

    /// Ordering that sorts better values first.
    pub fn cmp_best_first(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Direction::Maximize => b.total_cmp(&a),
            Direction::Minimize => a.total_cmp(&b),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximize" => Ok(Direction::Maximize),
            "minimize" => Ok(Direction::Minimize),
            other => Err(Error::validation(format!("unknown direction '{other}'"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        })
    }
}

/// The domain of a single hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    /// Uniform on the closed interval `[low, high]`.
    Uniform {
        low: f64,
        high: f64,
    },
    /// `exp(U(ln low, ln high))`.
    LogUniform {
        low: f64,
        high: f64,
    },
    /// One of a fixed list of integers.
    IntChoice {
        choices: Vec<i64>,
    },
    /// One of a fixed list of string tokens.
    Choice {
        choices: Vec<String>,
    },
    Boolean,
}

impl Distribution {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidDistribution {
                name: name.to_string(),
                reason,
            })
        };
        match self {
            Distribution::Uniform { low, high } | Distribution::LogUniform { low, high } => {
                if !low.is_finite() || !high.is_finite() {
                    return bad(format!("bounds must be finite, got [{low}, {high}]"));
                }
                if low >= high {
                    return bad(format!("low ({low}) must be less than high ({high})"));
                }
                if matches!(self, Distribution::LogUniform { .. }) && *low <= 0.0 {
                    return bad(format!("log-uniform requires low > 0, got {low}"));
                }
                Ok(())
            }
            Distribution::IntChoice { choices } => {
                if choices.is_empty() {
                    return bad("choices must be non-empty".into());
                }
                for (i, c) in choices.iter().enumerate() {
                    if choices[..i].contains(c) {
                        return bad(format!("duplicate choice {c}"));
                    }
                }
                Ok(())
            }
            Distribution::Choice { choices } => {
                if choices.is_empty() {
                    return bad("choices must be non-empty".into());
                }
                for (i, c) in choices.iter().enumerate() {
                    if choices[..i].contains(c) {
                        return bad(format!("duplicate choice '{c}'"));
                    }
                }
                Ok(())
            }
            Distribution::Boolean => Ok(()),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            Distribution::Uniform { .. } | Distribution::LogUniform { .. }
        )
    }

    /// Number of discrete options, or `None` for continuous kinds.
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            Distribution::IntChoice { choices } => Some(choices.len()),
            Distribution::Choice { choices } => Some(choices.len()),
            Distribution::Boolean => Some(2),
            _ => None,
        }
    }

    /// The value of the `index`-th discrete option.
    pub fn choice_value(&self, index: usize) -> Option<ParamValue> {
        match self {
            Distribution::IntChoice { choices } => choices.get(index).map(|&c| ParamValue::Int(c)),
            Distribution::Choice { choices } => {
                choices.get(index).map(|c| ParamValue::Str(c.clone()))
            }
            Distribution::Boolean if index < 2 => Some(ParamValue::Bool(index == 1)),
            _ => None,
        }
    }

    /// Position of `value` among the discrete options.
    pub fn choice_index(&self, value: &ParamValue) -> Option<usize> {
        match (self, value) {
            (Distribution::IntChoice { choices }, ParamValue::Int(v)) => {
                choices.iter().position(|c| c == v)
            }
            (Distribution::Choice { choices }, ParamValue::Str(v)) => {
                choices.iter().position(|c| c == v)
            }
            (Distribution::Boolean, ParamValue::Bool(b)) => Some(usize::from(*b)),
            _ => None,
        }
    }

    /// Bounds of a continuous distribution in its modelling space
    /// (natural log for log-uniform).
    pub fn internal_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Distribution::Uniform { low, high } => Some((low, high)),
            Distribution::LogUniform { low, high } => Some((low.ln(), high.ln())),
            _ => None,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, Distribution::LogUniform { .. })
    }

    /// Maps a modelling-space coordinate back to a parameter value, clamped
    /// into the domain.
    pub fn from_internal(&self, x: f64) -> ParamValue {
        match *self {
            Distribution::Uniform { low, high } => ParamValue::Float(x.clamp(low, high)),
            Distribution::LogUniform { low, high } => ParamValue::Float(x.exp().clamp(low, high)),
            _ => panic!("from_internal called on a discrete distribution"),
        }
    }

    pub fn to_internal(&self, value: &ParamValue) -> Option<f64> {
        let v = value.as_f64()?;
        match self {
            Distribution::Uniform { .. } => Some(v),
            Distribution::LogUniform { .. } => Some(v.ln()),
            _ => None,
        }
    }

    /// Domain containment.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (
                Distribution::Uniform { low, high } | Distribution::LogUniform { low, high },
                ParamValue::Float(v),
            ) => v.is_finite() && *low <= *v && *v <= *high,
            _ => self.choice_index(value).is_some(),
        }
    }

    /// Reinterprets a loosely typed value (e.g. an integer literal for a
    /// float parameter) as the canonical variant for this distribution.
    pub fn coerce(&self, value: &ParamValue) -> Option<ParamValue> {
        let v = match (self, value) {
            (Distribution::Uniform { .. } | Distribution::LogUniform { .. }, v) => {
                ParamValue::Float(v.as_f64()?)
            }
            (Distribution::IntChoice { .. }, ParamValue::Float(f)) if f.fract() == 0.0 => {
                ParamValue::Int(*f as i64)
            }
            (_, v) => v.clone(),
        };
        self.contains(&v).then_some(v)
    }
}

/// A concrete hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Float(v) => Some(v),
            ParamValue::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            ParamValue::Bool(b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

/// Ordered map from parameter name to its domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace(IndexMap<String, Distribution>);

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter; fails on an empty or duplicate name or an invalid domain.
    pub fn add(&mut self, name: impl Into<String>, dist: Distribution) -> Result<&mut Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::validation("parameter names must be non-empty"));
        }
        if self.0.contains_key(&name) {
            return Err(Error::validation(format!("duplicate parameter '{name}'")));
        }
        dist.validate(&name)?;
        self.0.insert(name, dist);
        Ok(self)
    }

    pub fn with(mut self, name: impl Into<String>, dist: Distribution) -> Result<Self> {
        self.add(name, dist)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, dist) in &self.0 {
            if name.is_empty() {
                return Err(Error::validation("parameter names must be non-empty"));
            }
            dist.validate(name)?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Distribution> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Distribution)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that `params` assigns every parameter exactly once, in-domain.
    pub fn check_assignment(&self, params: &ParamAssignment) -> Result<()> {
        if params.len() != self.len() {
            return Err(Error::validation(format!(
                "assignment has {} parameters, space has {}",
                params.len(),
                self.len()
            )));
        }
        for (name, dist) in self.iter() {
            match params.get(name) {
                Some(v) if dist.contains(v) => {}
                Some(v) => {
                    return Err(Error::validation(format!(
                        "value {v} for '{name}' lies outside its domain"
                    )))
                }
                None => return Err(Error::validation(format!("missing parameter '{name}'"))),
            }
        }
        Ok(())
    }

    /// Canonicalizes values parsed from text against this space.
    pub fn coerce_assignment(&self, params: &ParamAssignment) -> Result<ParamAssignment> {
        let mut out = ParamAssignment::new();
        for (name, dist) in self.iter() {
            let raw = params
                .get(name)
                .ok_or_else(|| Error::validation(format!("missing parameter '{name}'")))?;
            let v = dist.coerce(raw).ok_or_else(|| {
                Error::validation(format!("value {raw} for '{name}' lies outside its domain"))
            })?;
            out.insert(name, v);
        }
        if params.len() != out.len() {
            return Err(Error::validation(
                "assignment names parameters not in the space",
            ));
        }
        Ok(out)
    }
}

/// Concrete values for every parameter of a space, in space order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamAssignment(IndexMap<String, ParamValue>);

impl ParamAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: ParamValue) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(ParamValue::as_f64)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, ParamValue)> for ParamAssignment {
    fn from_iter<I: IntoIterator<Item = (String, ParamValue)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}
