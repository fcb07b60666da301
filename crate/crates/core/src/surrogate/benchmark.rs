//! Analytic test functions with known minima.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Distribution, ParamAssignment, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Benchmark {
    /// `Σ (x_i − 0.5)²` over every numeric parameter.
    #[serde(rename = "sphere")]
    Sphere,
    /// `(1 − x)² + 100 (y − x²)²`.
    #[serde(rename = "rosenbrock-2d")]
    Rosenbrock2d,
    /// `(x − 0.3)²`.
    #[serde(rename = "quadratic-1d")]
    Quadratic1d,
}

impl Benchmark {
    pub fn evaluate(self, x: &ParamAssignment) -> Result<f64> {
        let get = |name: &str| {
            x.get_f64(name).ok_or_else(|| {
                Error::validation(format!("{self} needs numeric parameter '{name}'"))
            })
        };
        match self {
            Benchmark::Sphere => {
                if x.is_empty() {
                    return Err(Error::validation("sphere needs at least one parameter"));
                }
                x.iter()
                    .map(|(name, v)| {
                        v.as_f64().map(|v| (v - 0.5).powi(2)).ok_or_else(|| {
                            Error::validation(format!("sphere parameter '{name}' is not numeric"))
                        })
                    })
                    .sum()
            }
            Benchmark::Rosenbrock2d => {
                let (a, b) = (get("x")?, get("y")?);
                Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
            }
            Benchmark::Quadratic1d => Ok((get("x")? - 0.3).powi(2)),
        }
    }

    /// The documented domain: `[0,1]` (two axes for sphere) or `[-2,2]²`.
    pub fn default_space(self) -> SearchSpace {
        let unit = Distribution::Uniform {
            low: 0.0,
            high: 1.0,
        };
        let wide = Distribution::Uniform {
            low: -2.0,
            high: 2.0,
        };
        let space = match self {
            Benchmark::Sphere => SearchSpace::new()
                .with("x0", unit.clone())
                .and_then(|s| s.with("x1", unit)),
            Benchmark::Rosenbrock2d => SearchSpace::new()
                .with("x", wide.clone())
                .and_then(|s| s.with("y", wide)),
            Benchmark::Quadratic1d => SearchSpace::new().with("x", unit),
        };
        space.expect("static benchmark spaces are valid")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Sphere => "sphere",
            Benchmark::Rosenbrock2d => "rosenbrock-2d",
            Benchmark::Quadratic1d => "quadratic-1d",
        }
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Benchmark::Sphere),
            "rosenbrock-2d" => Ok(Benchmark::Rosenbrock2d),
            "quadratic-1d" => Ok(Benchmark::Quadratic1d),
            other => Err(Error::validation(format!("unknown benchmark '{other}'"))),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamValue;

    fn point(pairs: &[(&str, f64)]) -> ParamAssignment {
        pairs
            .iter()
            .map(|&(k, v)| (k.to_string(), ParamValue::Float(v)))
            .collect()
    }

    #[test]
    fn analytic_minima() {
        assert_eq!(
            Benchmark::Sphere
                .evaluate(&point(&[("a", 0.5), ("b", 0.5)]))
                .unwrap(),
            0.0
        );
        assert_eq!(
            Benchmark::Quadratic1d
                .evaluate(&point(&[("x", 0.3)]))
                .unwrap(),
            0.0
        );
        assert_eq!(
            Benchmark::Rosenbrock2d
                .evaluate(&point(&[("x", 1.0), ("y", 1.0)]))
                .unwrap(),
            0.0
        );
        assert!("ackley".parse::<Benchmark>().is_err());
        assert!(Benchmark::Quadratic1d
            .evaluate(&point(&[("y", 0.3)]))
            .is_err());
    }
}
