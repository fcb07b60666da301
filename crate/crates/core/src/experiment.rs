//! Turns an [`ExperimentConfig`] into a run: sampler, objective, journal,
//! `best.json` and reports under the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

use crate::config::{ExperimentConfig, SamplerConfig};
use crate::data::{load_manifest, prepare_split};
use crate::error::{Error, Result};
use crate::orchestrator::{
    read_journal, reopen, replay_finalized, run_study, Journal, JournalRecord, Objective,
    RunContext, RunSummary, SurrogateObjective,
};
use crate::report::{write_reports, BestTrial, ReportFormat, ReportOutput};
use crate::sampler::{GridSampler, RandomSampler, Sampler, TpeSampler};
use crate::study::Study;
use crate::surrogate::{make_synthetic_dataset, Dataset};

pub fn build_sampler(cfg: &ExperimentConfig) -> Result<Box<dyn Sampler>> {
    Ok(match &cfg.sampler {
        SamplerConfig::Tpe(c) => Box::new(TpeSampler::new(c.clone())?),
        SamplerConfig::Random => Box::new(RandomSampler),
        SamplerConfig::Grid { resolution } => {
            Box::new(GridSampler::new(&cfg.search_space(), *resolution)?)
        }
    })
}

/// Training and validation sets for the surrogate objective.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = cfg
        .data
        .clone()
        .unwrap_or_else(|| crate::config::DataConfig {
            manifest: None,
            image_root: None,
            image_side: 16,
            synthetic: None,
            ratios: Default::default(),
            seed: None,
        });
    let seed = data.seed.unwrap_or(cfg.seed);
    match &data.manifest {
        Some(path) => {
            let entries = load_manifest(path)?;
            let (split, _) = prepare_split(&entries, cfg.task, &data.ratios, seed)?;
            let root = data
                .image_root
                .clone()
                .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
            Ok((
                Dataset::from_manifest(&split.train, &root, data.image_side, cfg.task)?,
                Dataset::from_manifest(&split.val, &root, data.image_side, cfg.task)?,
            ))
        }
        None => {
            let full = make_synthetic_dataset(&cfg.synthetic_spec())?;
            let (train, val, _) = full.split(&data.ratios, seed)?;
            Ok((train, val))
        }
    }
}

pub fn build_objective(cfg: &ExperimentConfig) -> Result<Box<dyn Objective>> {
    Ok(match cfg.objective.benchmark() {
        Some(b) => Box::new(b),
        None => {
            let (train, val) = load_datasets(cfg)?;
            Box::new(SurrogateObjective {
                train,
                val,
                epochs: cfg.epochs,
                hidden_dim: cfg.hidden_dim,
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: RunSummary,
    pub journal_path: PathBuf,
    pub best: Option<BestTrial>,
    pub report: ReportOutput,
}

/// Starts a fresh study, replacing any journal in the output directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    stop: Option<&AtomicBool>,
) -> Result<ExperimentResult> {
    let sampler = build_sampler(cfg)?;
    let objective = build_objective(cfg)?;
    let study = Study::create(cfg.search_space(), cfg.direction(), cfg.seed)?;
    let path = cfg.journal_path();
    let mut journal = Journal::create(&path)?;
    journal.append_next(JournalRecord::study_meta(
        study.space(),
        study.direction(),
        study.seed(),
        &cfg.hash(),
    ))?;
    drive(
        cfg,
        study,
        journal,
        sampler.as_ref(),
        objective.as_ref(),
        stop,
    )
}

/// Continues the study journaled in the output directory up to the
/// configured trial budget. The journal's space, direction and seed must
/// match the config.
pub fn resume_experiment(
    cfg: &ExperimentConfig,
    stop: Option<&AtomicBool>,
) -> Result<ExperimentResult> {
    let path = cfg.journal_path();
    let (journal, replay) = reopen(&path)?;
    let s = &replay.study;
    if s.space() != &cfg.search_space() || s.direction() != cfg.direction() || s.seed() != cfg.seed
    {
        return Err(Error::Config {
            path: path.display().to_string(),
            reason: "journal was written by a study with a different space, direction or seed"
                .into(),
        });
    }
    let sampler = build_sampler(cfg)?;
    let objective = build_objective(cfg)?;
    drive(
        cfg,
        replay.study,
        journal,
        sampler.as_ref(),
        objective.as_ref(),
        stop,
    )
}

fn drive(
    cfg: &ExperimentConfig,
    study: Study,
    journal: Journal,
    sampler: &dyn Sampler,
    objective: &dyn Objective,
    stop: Option<&AtomicBool>,
) -> Result<ExperimentResult> {
    let journal_path = journal.path().to_path_buf();
    let ctx = RunContext {
        sampler,
        objective,
        policy: &cfg.policy,
        pruner: cfg.pruner.as_ref(),
        stop,
    };
    let summary = run_study(study, journal, &ctx)?;
    let (best, report) = finalize_outputs(&journal_path, &cfg.output_dir, ReportFormat::Csv)?;
    Ok(ExperimentResult {
        summary,
        journal_path,
        best,
        report,
    })
}

/// Writes `best.json` (when a trial completed) and the reports for the
/// journal at `journal_path`.
pub fn finalize_outputs(
    journal_path: &Path,
    dir: &Path,
    format: ReportFormat,
) -> Result<(Option<BestTrial>, ReportOutput)> {
    let replay = replay_finalized(&read_journal(journal_path)?)?;
    let best = BestTrial::of(&replay.study).ok();
    let best_path = dir.join("best.json");
    match &best {
        Some(b) => fs::write(&best_path, b.to_json())?,
        None if best_path.exists() => fs::remove_file(&best_path)?,
        None => {}
    }
    let report = write_reports(&replay, dir, format)?;
    Ok((best, report))
}
