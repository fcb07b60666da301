//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand};

use crate::config::{load_config, SEED_ENV};
use crate::data::{load_manifest, prepare_split, write_split, SplitRatios, Task};
use crate::error::Result;
use crate::experiment::{resume_experiment, run_experiment, ExperimentResult};
use crate::orchestrator::{read_journal, replay_finalized, StopReason};
use crate::report::{write_reports, BestTrial, ReportFormat};

#[derive(Debug, Parser)]
#[command(
    name = "studyforge",
    version,
    about = "Config-driven hyperparameter studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a fresh study from a config file.
    Run {
        config: PathBuf,
        /// Dot-path override, e.g. `policy.n_trials=3`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Continue the study journaled in the config's output directory.
    Resume {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write trial tables, summaries and the history plot for a journal.
    Report {
        journal: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Output directory; defaults to the journal's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the best trial of a journal as JSON.
    Best { journal: PathBuf },
    /// Prepare stratified train/val/test splits from a manifest.
    Split {
        manifest: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        mode: Task,
        #[arg(long)]
        out: PathBuf,
    },
}

static STOP: AtomicBool = AtomicBool::new(false);

fn summarize(r: &ExperimentResult) {
    let study = &r.summary.study;
    eprintln!(
        "{} trials ({} complete), stopped: {}",
        study.trials().len(),
        study.n_complete(),
        match r.summary.stop_reason {
            StopReason::Budget => "trial budget reached",
            StopReason::Threshold => "stop threshold reached",
            StopReason::Interrupted => "interrupted",
        }
    );
    for w in &r.report.warnings {
        eprintln!("warning: {w}");
    }
    match &r.best {
        Some(b) => eprintln!("best trial {} value {}", b.trial_id, b.value),
        None => eprintln!("warning: no trial completed"),
    }
    eprintln!("journal: {}", r.journal_path.display());
}

fn execute(cmd: Command) -> Result<()> {
    let env_seed = std::env::var(SEED_ENV).ok();
    match cmd {
        Command::Run { config, overrides } => {
            let cfg = load_config(&config, &overrides, env_seed.as_deref())?;
            let _ = ctrlc::set_handler(|| STOP.store(true, Ordering::SeqCst));
            summarize(&run_experiment(&cfg, Some(&STOP))?);
        }
        Command::Resume { config, overrides } => {
            let cfg = load_config(&config, &overrides, env_seed.as_deref())?;
            let _ = ctrlc::set_handler(|| STOP.store(true, Ordering::SeqCst));
            summarize(&resume_experiment(&cfg, Some(&STOP))?);
        }
        Command::Report {
            journal,
            format,
            out,
        } => {
            let dir =
                out.unwrap_or_else(|| journal.parent().map(PathBuf::from).unwrap_or_default());
            let replay = replay_finalized(&read_journal(&journal)?)?;
            let report = write_reports(&replay, &dir, format)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                println!("{}", f.display());
            }
        }
        Command::Best { journal } => {
            let replay = replay_finalized(&read_journal(&journal)?)?;
            print!("{}", BestTrial::of(&replay.study)?.to_json());
        }
        Command::Split {
            manifest,
            seed,
            mode,
            out,
        } => {
            let entries = load_manifest(&manifest)?;
            let ratios = SplitRatios::default();
            let (split, stats) = prepare_split(&entries, mode, &ratios, seed)?;
            write_split(&out, &split, &stats, mode, &ratios)?;
            eprintln!(
                "{} entries, {} excluded; train {} val {} test {}",
                stats.input,
                stats.excluded_multi_image,
                split.train.len(),
                split.val.len(),
                split.test.len()
            );
        }
    }
    Ok(())
}

pub fn main_with(cli: Cli) -> ExitCode {
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
