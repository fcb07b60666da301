//! Experiment configuration: strict YAML parsing, dot-path overrides and
//! semantic validation with key paths.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use sha2::{Digest, Sha256};

use crate::data::{SplitRatios, Task};
use crate::error::{Error, Result};
use crate::orchestrator::RunPolicy;
use crate::pruner::PrunerConfig;
use crate::sampler::TpeConfig;
use crate::space::{Direction, Distribution, ParamAssignment, SearchSpace};
use crate::surrogate::{Benchmark, Hyperparams, SyntheticSpec, KNOWN_PARAMS};

pub const SEED_ENV: &str = "STUDYFORGE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[serde(rename = "surrogate")]
    Surrogate,
    #[serde(rename = "sphere")]
    Sphere,
    #[serde(rename = "rosenbrock-2d")]
    Rosenbrock2d,
    #[serde(rename = "quadratic-1d")]
    Quadratic1d,
}

impl ObjectiveKind {
    pub fn benchmark(self) -> Option<Benchmark> {
        match self {
            ObjectiveKind::Surrogate => None,
            ObjectiveKind::Sphere => Some(Benchmark::Sphere),
            ObjectiveKind::Rosenbrock2d => Some(Benchmark::Rosenbrock2d),
            ObjectiveKind::Quadratic1d => Some(Benchmark::Quadratic1d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerConfig {
    Tpe(TpeConfig),
    Random,
    Grid {
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
}

fn default_resolution() -> usize {
    10
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::Tpe(TpeConfig::default())
    }
}

/// Where the surrogate's images come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest CSV; image paths resolve against `image_root`, or the
    /// manifest's directory when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_root: Option<PathBuf>,
    /// Side length images are resized to before training.
    #[serde(default = "default_side")]
    pub image_side: usize,
    /// Used when no manifest is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub ratios: SplitRatios,
    /// Split seed; the study seed when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_side() -> usize {
    16
}

fn default_epochs() -> usize {
    20
}

fn default_hidden() -> usize {
    32
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_task() -> Task {
    Task::Binary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveKind,
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Defaults to maximize for the surrogate and minimize for benchmarks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    /// Empty means the benchmark's own domain.
    #[serde(default, skip_serializing_if = "SearchSpace::is_empty")]
    pub space: SearchSpace,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruner: Option<PrunerConfig>,
    pub policy: RunPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
}

fn at(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Config {
        path: path.to_string(),
        reason: e.to_string(),
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_with_overrides(text, &[])
}

/// Parses a document, applies `key.path=value` overrides, then validates.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut doc: Value = serde_yaml::from_str(text).map_err(|e| at("<document>", e))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    from_value(doc)
}

fn from_value(doc: Value) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        at(
            if path == "." { "<document>" } else { &path },
            e.into_inner(),
        )
    })?;
    cfg.policy.pruning_enabled = cfg.pruner.is_some();
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file, applies overrides and then the seed environment
/// override (`env_seed` is the raw variable value, if set).
pub fn load_config(
    path: &Path,
    overrides: &[String],
    env_seed: Option<&str>,
) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| at(&path.display().to_string(), e))?;
    let mut overrides = overrides.to_vec();
    if let Some(seed) = env_seed {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| at(SEED_ENV, format!("not an unsigned integer: '{seed}'")))?;
        overrides.push(format!("seed={seed}"));
    }
    parse_with_overrides(&text, &overrides)
}

/// Sets the value at a dot-separated key path, creating maps as needed.
/// The right-hand side is read as a YAML scalar or flow collection.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| at(assignment, "override must look like key.path=value"))?;
    let value: Value = serde_yaml::from_str(raw).map_err(|e| at(key, e))?;
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(at(key, "empty key segment"));
    }
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Mapping(Default::default());
        }
        let map = node
            .as_mapping_mut()
            .ok_or_else(|| at(&parts[..i].join("."), "cannot descend into a non-map value"))?;
        let k = Value::String(part.to_string());
        if i + 1 == parts.len() {
            map.insert(k, value);
            return Ok(());
        }
        node = map.entry(k).or_insert(Value::Null);
    }
    unreachable!("split yields at least one segment")
}

impl ExperimentConfig {
    pub fn direction(&self) -> Direction {
        self.direction.unwrap_or(match self.objective {
            ObjectiveKind::Surrogate => Direction::Maximize,
            _ => Direction::Minimize,
        })
    }

    /// The configured space, or the benchmark default when none is given.
    pub fn search_space(&self) -> SearchSpace {
        match (self.space.is_empty(), self.objective.benchmark()) {
            (true, Some(b)) => b.default_space(),
            _ => self.space.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.search_space();
        if space.is_empty() {
            return Err(at(
                "space",
                "surrogate objective needs a non-empty search space",
            ));
        }
        for (name, dist) in space.iter() {
            dist.validate(name)
                .map_err(|e| at(&format!("space.{name}"), e))?;
        }
        match self.objective.benchmark() {
            None => self.validate_surrogate(&space)?,
            Some(b) => {
                b.evaluate(&midpoint(&space)).map_err(|e| at("space", e))?;
            }
        }
        match &self.sampler {
            SamplerConfig::Tpe(c) => c.validate().map_err(|e| at("sampler", e))?,
            SamplerConfig::Random => {}
            SamplerConfig::Grid { resolution } => {
                crate::sampler::GridSampler::new(&space, *resolution)
                    .map_err(|e| at("sampler.resolution", e))?;
            }
        }
        if let Some(p) = &self.pruner {
            p.validate().map_err(|e| at("pruner", e))?;
        }
        self.policy
            .validate(self.direction())
            .map_err(|e| at("policy", e))?;
        if self.hidden_dim == 0 {
            return Err(at("hidden_dim", "must be at least 1"));
        }
        Ok(())
    }

    fn validate_surrogate(&self, space: &SearchSpace) -> Result<()> {
        for (name, dist) in space.iter() {
            let path = format!("space.{name}");
            if !KNOWN_PARAMS.contains(&name) {
                return Err(at(
                    &path,
                    format!(
                        "unknown parameter; expected one of {}",
                        KNOWN_PARAMS.join(", ")
                    ),
                ));
            }
            for v in extremes(dist) {
                let p: ParamAssignment = [(name.to_string(), v)].into_iter().collect();
                Hyperparams::from_assignment(&p).map_err(|e| at(&path, e))?;
            }
        }
        if let Some(d) = &self.data {
            d.ratios.validate().map_err(|e| at("data.ratios", e))?;
            if d.image_side < 2 {
                return Err(at("data.image_side", "must be at least 2"));
            }
            if let Some(s) = &d.synthetic {
                if d.manifest.is_some() {
                    return Err(at("data", "give either manifest or synthetic, not both"));
                }
                s.validate().map_err(|e| at("data.synthetic", e))?;
                if s.n_classes != self.task.n_classes() {
                    return Err(at(
                        "data.synthetic.n_classes",
                        format!("{} task needs {} classes", self.task, self.task.n_classes()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_yaml(&self) -> Result<String> {
        serde_yaml::to_string(self).map_err(|e| at("<document>", e))
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form,
    /// ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json)[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Default synthetic data when the config names none.
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        self.data
            .as_ref()
            .and_then(|d| d.synthetic.clone())
            .unwrap_or(SyntheticSpec {
                n_classes: self.task.n_classes(),
                n_per_class: 100,
                image_side: 8,
                noise_std: 0.4,
                seed: self.seed,
            })
    }

    pub fn journal_path(&self) -> PathBuf {
        self.output_dir.join("journal.jsonl")
    }
}

/// Lower and upper bound of a continuous range, or every choice.
fn extremes(dist: &Distribution) -> Vec<crate::space::ParamValue> {
    match dist.cardinality() {
        Some(k) => (0..k).filter_map(|i| dist.choice_value(i)).collect(),
        None => {
            let (lo, hi) = dist.internal_bounds().expect("continuous");
            vec![dist.from_internal(lo), dist.from_internal(hi)]
        }
    }
}

fn midpoint(space: &SearchSpace) -> ParamAssignment {
    space
        .iter()
        .map(|(name, dist)| {
            let v = match dist.internal_bounds() {
                Some((lo, hi)) => dist.from_internal(0.5 * (lo + hi)),
                None => dist.choice_value(0).expect("non-empty choices"),
            };
            (name.to_string(), v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamValue;

    const QUAD: &str = "objective: quadratic-1d\nseed: 1\npolicy:\n  n_trials: 10\n";

    fn default_yaml() -> String {
        fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/default.yaml"
        ))
        .unwrap()
    }

    #[test]
    fn shipped_default_matches_published_space() {
        let cfg = parse_config(&default_yaml()).unwrap();
        let s = &cfg.space;
        assert_eq!(
            s.get("lr"),
            Some(&Distribution::LogUniform {
                low: 1e-4,
                high: 1e-3
            })
        );
        assert_eq!(
            s.get("dropout"),
            Some(&Distribution::Uniform {
                low: 0.0,
                high: 0.2
            })
        );
        assert_eq!(
            s.get("batch_size"),
            Some(&Distribution::IntChoice {
                choices: vec![8, 16, 32, 64, 128]
            })
        );
        assert_eq!(
            s.get("rotation"),
            Some(&Distribution::Uniform {
                low: 0.0,
                high: 15.0
            })
        );
        assert_eq!(
            s.get("scale"),
            Some(&Distribution::Uniform {
                low: 0.0,
                high: 0.3
            })
        );
        assert_eq!(
            s.get("shear"),
            Some(&Distribution::Uniform {
                low: 0.0,
                high: 0.3
            })
        );
        assert_eq!(
            s.get("translate"),
            Some(&Distribution::Uniform {
                low: 0.0,
                high: 1.0
            })
        );
        assert_eq!(s.get("hflip"), Some(&Distribution::Boolean));
        assert_eq!(s.get("vflip"), Some(&Distribution::Boolean));
        assert_eq!(cfg.direction(), Direction::Maximize);
    }

    #[test]
    fn zero_trials_rejected_with_path() {
        let err = parse_with_overrides(QUAD, &["policy.n_trials=0".into()]).unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "policy"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_type_errors_carry_paths() {
        let err = parse_config("objective: quadratic-1d\npolicy:\n  n_trials: 3\n  budget: 4\n")
            .unwrap_err();
        assert!(
            matches!(&err, Error::Config { path, .. } if path == "policy.budget"),
            "{err:?}"
        );
        let err = parse_config("objective: quadratic-1d\npolicy:\n  n_trials: many\n").unwrap_err();
        assert!(
            matches!(&err, Error::Config { path, .. } if path == "policy.n_trials"),
            "{err:?}"
        );
        let err = parse_config("objective: surrogate\nspace:\n  momentum: {type: uniform, low: 0, high: 1}\npolicy: {n_trials: 1}\n")
            .unwrap_err();
        assert!(
            matches!(&err, Error::Config { path, .. } if path == "space.momentum"),
            "{err:?}"
        );
        let err = parse_config("objective: surrogate\nspace:\n  dropout: {type: uniform, low: 0, high: 1}\npolicy: {n_trials: 1}\n")
            .unwrap_err();
        assert!(
            matches!(&err, Error::Config { path, .. } if path == "space.dropout"),
            "{err:?}"
        );
    }

    #[test]
    fn short_exponent_floats_parse() {
        let cfg = parse_config(
            "objective: surrogate\nspace:\n  lr: {type: log_uniform, low: 1e-4, high: 1e-3}\npolicy: {n_trials: 1}\n",
        )
        .unwrap();
        assert_eq!(
            cfg.space.get("lr"),
            Some(&Distribution::LogUniform {
                low: 1e-4,
                high: 1e-3
            })
        );
    }

    #[test]
    fn omitted_pruner_disables_pruning() {
        let cfg = parse_config(QUAD).unwrap();
        assert!(!cfg.policy.pruning_enabled);
        assert_eq!(cfg.direction(), Direction::Minimize);
        assert_eq!(cfg.sampler, SamplerConfig::default());
        let cfg = parse_with_overrides(QUAD, &["pruner.warmup_steps=4".into()]).unwrap();
        assert!(cfg.policy.pruning_enabled);
        assert_eq!(cfg.pruner.unwrap().min_completed, 3);
    }

    #[test]
    fn overrides_and_env_seed() {
        let cfg = parse_with_overrides(
            QUAD,
            &[
                "policy.n_trials=3".into(),
                "sampler={kind: grid, resolution: 4}".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.policy.n_trials, 3);
        assert_eq!(cfg.sampler, SamplerConfig::Grid { resolution: 4 });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.yaml");
        fs::write(&p, QUAD).unwrap();
        assert_eq!(load_config(&p, &[], Some("77")).unwrap().seed, 77);
        assert!(load_config(&p, &[], Some("x")).is_err());
        assert!(load_config(&dir.path().join("missing.yaml"), &[], None).is_err());
    }

    #[test]
    fn yaml_round_trip_and_hash() {
        let cfg = parse_config(&default_yaml()).unwrap();
        let again = parse_config(&cfg.to_yaml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 16);
        let other = parse_with_overrides(&default_yaml(), &["seed=99".into()]).unwrap();
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn benchmark_space_defaults_and_checks() {
        let cfg = parse_config(QUAD).unwrap();
        assert_eq!(cfg.search_space().names().collect::<Vec<_>>(), ["x"]);
        let bad = "objective: rosenbrock-2d\nspace:\n  x: {type: uniform, low: 0, high: 1}\npolicy: {n_trials: 2}\n";
        assert!(parse_config(bad).is_err());
        let mut p = ParamAssignment::new();
        p.insert("x", ParamValue::Float(0.5));
        assert_eq!(midpoint(&cfg.search_space()), p);
    }
}
