//! Python bindings: the ask/tell study, pruning, config-driven runs and
//! manifest splitting.
//!
//! Structured values (search spaces, parameter assignments, results) cross
//! the boundary as plain dicts and lists via the `json` module.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::de::DeserializeOwned;
use serde::Serialize;

use studyforge::config::load_config;
use studyforge::data::{load_manifest, prepare_split, write_split, SplitRatios, Task};
use studyforge::experiment::{resume_experiment, run_experiment};
use studyforge::orchestrator::resume_study;
use studyforge::pruner::{should_prune, PrunerConfig};
use studyforge::report::BestTrial;
use studyforge::sampler::{GridSampler, RandomSampler, Sampler, TpeSampler};
use studyforge::surrogate::Benchmark;
use studyforge::{Direction, Outcome, ParamAssignment, SearchSpace, Study};

create_exception!(pystudyforge, StudyforgeError, PyException);

fn err(e: studyforge::Error) -> PyErr {
    StudyforgeError::new_err(e.to_string())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn sampler_for(name: &str, space: &SearchSpace, resolution: usize) -> PyResult<Box<dyn Sampler>> {
    Ok(match name {
        "tpe" => Box::new(TpeSampler::default()),
        "random" => Box::new(RandomSampler),
        "grid" => Box::new(GridSampler::new(space, resolution).map_err(err)?),
        other => return Err(PyValueError::new_err(format!("unknown sampler '{other}'"))),
    })
}

/// An optimization study driven with ask/tell.
#[pyclass(name = "Study", module = "pystudyforge")]
pub struct PyStudy {
    inner: Study,
}

#[pymethods]
impl PyStudy {
    /// `space` maps names to distributions, e.g.
    /// `{"x": {"type": "uniform", "low": 0.0, "high": 1.0}}`.
    #[new]
    #[pyo3(signature = (space, direction = "maximize", seed = 0))]
    fn new(space: &Bound<'_, PyAny>, direction: &str, seed: u64) -> PyResult<Self> {
        let space: SearchSpace = from_py(space)?;
        let direction: Direction = direction.parse().map_err(err)?;
        Ok(Self {
            inner: Study::create(space, direction, seed).map_err(err)?,
        })
    }

    /// Rebuilds a study from a journal file.
    #[staticmethod]
    fn from_journal(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: resume_study(&path).map_err(err)?,
        })
    }

    #[getter]
    fn direction(&self) -> String {
        self.inner.direction().to_string()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn __len__(&self) -> usize {
        self.inner.trials().len()
    }

    /// Starts a trial and returns `(trial_id, params)`.
    #[pyo3(signature = (sampler = "tpe", resolution = 10))]
    fn ask<'py>(
        &mut self,
        py: Python<'py>,
        sampler: &str,
        resolution: usize,
    ) -> PyResult<(usize, Bound<'py, PyAny>)> {
        let s = sampler_for(sampler, self.inner.space(), resolution)?;
        let t = self.inner.ask(s.as_ref()).map_err(err)?;
        Ok((t.trial_id, to_py(py, &t.params)?))
    }

    /// Starts a trial with caller-chosen parameters.
    fn enqueue(&mut self, params: &Bound<'_, PyAny>) -> PyResult<usize> {
        let params: ParamAssignment = from_py(params)?;
        let params = self.inner.space().coerce_assignment(&params).map_err(err)?;
        Ok(self.inner.start_trial_with(params).map_err(err)?.trial_id)
    }

    /// Finishes a trial: pass `value` for a complete trial, or
    /// `state="pruned"` / `state="failed"`.
    #[pyo3(signature = (trial_id, value = None, state = "complete"))]
    fn tell(&mut self, trial_id: usize, value: Option<f64>, state: &str) -> PyResult<()> {
        let outcome = match (state, value) {
            ("complete", Some(v)) => Outcome::Value(v),
            ("complete", None) => {
                return Err(PyValueError::new_err("a complete trial needs a value"))
            }
            ("pruned", _) => Outcome::Pruned,
            ("failed", _) => Outcome::Failed,
            (other, _) => return Err(PyValueError::new_err(format!("unknown state '{other}'"))),
        };
        self.inner.tell(trial_id, outcome).map_err(err)?;
        Ok(())
    }

    fn report(&mut self, trial_id: usize, step: u64, value: f64) -> PyResult<()> {
        self.inner
            .report_intermediate(trial_id, step, value)
            .map_err(err)
    }

    #[pyo3(signature = (trial_id, step, warmup_steps = 2, min_completed = 3))]
    fn should_prune(
        &self,
        trial_id: usize,
        step: u64,
        warmup_steps: u64,
        min_completed: usize,
    ) -> PyResult<bool> {
        let cfg = PrunerConfig {
            warmup_steps,
            min_completed,
        };
        should_prune(&self.inner, trial_id, step, &cfg, self.inner.direction()).map_err(err)
    }

    /// `{"trial_id", "value", "params"}` of the best complete trial.
    fn best_trial<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &BestTrial::of(&self.inner).map_err(err)?)
    }

    /// Every trial as a dict.
    fn trials<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items = self
            .inner
            .trials()
            .iter()
            .map(|t| to_py(py, t))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, items)
    }

    fn __repr__(&self) -> String {
        format!(
            "Study(direction={}, seed={}, trials={}, complete={})",
            self.inner.direction(),
            self.inner.seed(),
            self.inner.trials().len(),
            self.inner.n_complete()
        )
    }
}

/// Evaluates `sphere`, `rosenbrock-2d` or `quadratic-1d` at `params`.
#[pyfunction]
fn benchmark(name: &str, params: &Bound<'_, PyAny>) -> PyResult<f64> {
    let b: Benchmark = name.parse().map_err(err)?;
    b.evaluate(&from_py(params)?).map_err(err)
}

/// Runs (or with `resume=True` continues) the study a config file
/// describes; returns the best trial or `None`.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new(), resume = false))]
fn run<'py>(
    py: Python<'py>,
    config: PathBuf,
    overrides: Vec<String>,
    resume: bool,
) -> PyResult<Option<Bound<'py, PyAny>>> {
    let cfg = load_config(&config, &overrides, None).map_err(err)?;
    let result = py
        .detach(|| {
            if resume {
                resume_experiment(&cfg, None)
            } else {
                run_experiment(&cfg, None)
            }
        })
        .map_err(err)?;
    result.best.as_ref().map(|b| to_py(py, b)).transpose()
}

/// Writes train/val/test CSVs and `split_manifest.txt`; returns the
/// split sizes.
#[pyfunction]
#[pyo3(signature = (manifest, out, seed, mode = "multiclass"))]
fn split(
    manifest: PathBuf,
    out: PathBuf,
    seed: u64,
    mode: &str,
) -> PyResult<(usize, usize, usize)> {
    let task: Task = mode.parse().map_err(err)?;
    let entries = load_manifest(&manifest).map_err(err)?;
    let ratios = SplitRatios::default();
    let (s, stats) = prepare_split(&entries, task, &ratios, seed).map_err(err)?;
    write_split(&out, &s, &stats, task, &ratios).map_err(err)?;
    Ok((s.train.len(), s.val.len(), s.test.len()))
}

#[pymodule]
fn pystudyforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStudy>()?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add("StudyforgeError", m.py().get_type::<StudyforgeError>())?;
    Ok(())
}
