//! Tables, summaries and the optimization-history plot built from a
//! replayed journal.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orchestrator::Replay;
use crate::space::{Direction, ParamAssignment, ParamValue};
use crate::study::{Study, TrialState};
use crate::surrogate::ClassificationMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Md,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" => Ok(ReportFormat::Md),
            other => Err(Error::validation(format!(
                "unknown report format '{other}'"
            ))),
        }
    }
}

impl ReportFormat {
    fn ext(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Md => "md",
        }
    }
}

/// Contents of `best.json` and the output of `best`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTrial {
    pub trial_id: usize,
    pub value: f64,
    pub params: ParamAssignment,
}

impl BestTrial {
    pub fn of(study: &Study) -> Result<Self> {
        let t = study.best_trial()?;
        Ok(Self {
            trial_id: t.trial_id,
            value: t.final_value.expect("complete trial"),
            params: t.params.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("best trial serializes") + "\n"
    }
}

/// A header plus rows of already-formatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).expect("in-memory write");
                for r in &self.rows {
                    w.write_record(r).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
            }
            ReportFormat::Md => {
                let mut s = String::new();
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                s.push_str(&line(&self.header));
                s.push_str(&line(&vec!["---".to_string(); self.header.len()]));
                for r in &self.rows {
                    s.push_str(&line(r));
                }
                s
            }
        }
    }
}

fn cell(v: &ParamValue) -> String {
    v.to_string()
}

/// One row per complete trial: id, every parameter, state, final value.
pub fn trial_table(study: &Study) -> Table {
    let names: Vec<String> = study.space().names().map(str::to_string).collect();
    let mut header = vec!["trial_id".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["state".to_string(), "value".to_string()]);
    let rows = study
        .completed()
        .map(|t| {
            let mut r = vec![t.trial_id.to_string()];
            r.extend(
                names
                    .iter()
                    .map(|n| t.params.get(n).map(cell).unwrap_or_default()),
            );
            r.push(t.state.as_str().to_string());
            r.push(t.final_value.expect("complete trial").to_string());
            r
        })
        .collect();
    Table { header, rows }
}

/// Best complete value per choice of a categorical parameter, in choice
/// order; choices never completed are omitted.
pub fn best_per_value(study: &Study, param: &str) -> Option<Table> {
    let dist = study.space().get(param)?;
    let k = dist.cardinality()?;
    let direction = study.direction();
    let mut rows = Vec::new();
    for i in 0..k {
        let choice = dist.choice_value(i).expect("index in range");
        let values: Vec<f64> = study
            .completed()
            .filter(|t| t.params.get(param) == Some(&choice))
            .map(|t| t.final_value.expect("complete trial"))
            .collect();
        let Some(best) =
            values
                .iter()
                .copied()
                .reduce(|a, b| if direction.is_better(b, a) { b } else { a })
        else {
            continue;
        };
        rows.push(vec![
            cell(&choice),
            best.to_string(),
            values.len().to_string(),
        ]);
    }
    Some(Table {
        header: vec![
            param.to_string(),
            "best_value".to_string(),
            "n_complete".to_string(),
        ],
        rows,
    })
}

pub fn confusion_table(m: &ClassificationMetrics, class_names: &[String]) -> Table {
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(class_names.iter().cloned());
    let rows = m
        .confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = vec![class_names[i].clone()];
            r.extend(row.iter().map(u64::to_string));
            r
        })
        .collect();
    Table { header, rows }
}

pub fn f1_table(m: &ClassificationMetrics, class_names: &[String]) -> Table {
    let mut rows: Vec<Vec<String>> =
        m.f1.iter()
            .enumerate()
            .map(|(i, f)| vec![class_names[i].clone(), f.to_string()])
            .collect();
    rows.push(vec!["macro".to_string(), m.macro_f1.to_string()]);
    Table {
        header: vec!["class".to_string(), "f1".to_string()],
        rows,
    }
}

pub fn class_names(n: usize) -> Vec<String> {
    match n {
        2 => vec!["negative".into(), "positive".into()],
        4 => crate::data::Label::ALL
            .iter()
            .map(|l| l.to_string())
            .collect(),
        _ => (0..n).map(|i| format!("class_{i}")).collect(),
    }
}

/// `(trial_id, best value so far)` at each complete trial.
pub fn best_so_far(study: &Study) -> Vec<(usize, f64)> {
    let direction = study.direction();
    let mut best: Option<f64> = None;
    study
        .completed()
        .map(|t| {
            let v = t.final_value.expect("complete trial");
            let b = match best {
                Some(b) if !direction.is_better(v, b) => b,
                _ => v,
            };
            best = Some(b);
            (t.trial_id, b)
        })
        .collect()
}

/// Best-so-far line chart. Each point is a `<circle>` carrying
/// `data-trial` and `data-value` attributes.
pub fn history_svg(study: &Study) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let series = best_so_far(study);
    let raw: Vec<(usize, f64)> = study
        .completed()
        .map(|t| (t.trial_id, t.final_value.unwrap()))
        .collect();
    let n_trials = study.trials().len().max(1);
    let (mut lo, mut hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n_trials.max(2) - 1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">Optimization history ({})</text>"#,
        W / 2.0,
        match study.direction() {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        }
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black"><line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}"/></g>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        s,
        r#"<g font-family="sans-serif" font-size="11"><text x="{}" y="{}" text-anchor="middle">trial</text><text x="{PAD}" y="{}" text-anchor="middle">{lo:.4}</text><text x="{PAD}" y="{}" text-anchor="middle">{hi:.4}</text></g>"#,
        W / 2.0,
        H - 12.0,
        H - PAD + 16.0,
        PAD - 8.0
    );
    let _ = writeln!(s, r#"<g class="trials" fill="lightgray">"#);
    for &(id, v) in &raw {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, x(id), y(v));
    }
    let _ = writeln!(s, "</g>");
    if !series.is_empty() {
        let pts: Vec<String> = series
            .iter()
            .map(|&(id, v)| format!("{:.2},{:.2}", x(id), y(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="best-so-far" fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(s, r#"<g class="best-so-far" fill="steelblue">"#);
        for &(id, v) in &series {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" data-trial="{id}" data-value="{v}"/>"#,
                x(id),
                y(v)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Extracts the best-so-far series back out of a rendered history plot.
pub fn parse_history_svg(svg: &str) -> Vec<(usize, f64)> {
    let attr = |line: &str, name: &str| -> Option<String> {
        let start = line.find(&format!("{name}=\""))? + name.len() + 2;
        let end = start + line[start..].find('"')?;
        Some(line[start..end].to_string())
    };
    svg.lines()
        .filter_map(|l| {
            Some((
                attr(l, "data-trial")?.parse().ok()?,
                attr(l, "data-value")?.parse().ok()?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes the trial table, categorical summaries, classifier metrics of
/// the best trial (when recorded) and `history.svg` into `dir`.
pub fn write_reports(replay: &Replay, dir: &Path, format: ReportFormat) -> Result<ReportOutput> {
    fs::create_dir_all(dir)?;
    let study = &replay.study;
    let mut out = ReportOutput::default();
    let ext = format.ext();
    let mut emit = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        out.files.push(p);
        Ok(())
    };
    emit(format!("trials.{ext}"), trial_table(study).render(format))?;
    for name in study.space().names() {
        if let Some(t) = best_per_value(study, name) {
            emit(format!("summary_{name}.{ext}"), t.render(format))?;
        }
    }
    if let Ok(best) = study.best_trial() {
        if let Some(Some(m)) = replay.metrics.get(best.trial_id) {
            let names = class_names(m.f1.len());
            emit(
                format!("confusion.{ext}"),
                confusion_table(m, &names).render(format),
            )?;
            emit(format!("f1.{ext}"), f1_table(m, &names).render(format))?;
        }
    }
    emit("history.svg".to_string(), history_svg(study))?;
    if study.n_complete() == 0 {
        out.warnings
            .push("journal has no complete trials; trial table is empty".to_string());
    }
    let n_failed = study
        .trials()
        .iter()
        .filter(|t| t.state == TrialState::Failed)
        .count();
    if n_failed > 0 {
        out.warnings.push(format!("{n_failed} trial(s) failed"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Distribution, SearchSpace};
    use crate::study::Outcome;

    fn study() -> Study {
        let space = SearchSpace::new()
            .with(
                "batch_size",
                Distribution::IntChoice {
                    choices: vec![8, 16, 32, 64, 128],
                },
            )
            .unwrap();
        let mut s = Study::create(space, Direction::Maximize, 0).unwrap();
        let vals = [0.5, 0.7, 0.6, 0.8, 0.65, 0.75];
        for (i, v) in vals.iter().enumerate() {
            let b = [8, 16, 32, 64, 128, 64][i];
            let p: ParamAssignment = [("batch_size".to_string(), ParamValue::Int(b))]
                .into_iter()
                .collect();
            let id = s.start_trial_with(p).unwrap().trial_id;
            s.tell(id, Outcome::Value(*v)).unwrap();
        }
        let id = s
            .start_trial_with(
                [("batch_size".to_string(), ParamValue::Int(8))]
                    .into_iter()
                    .collect(),
            )
            .unwrap()
            .trial_id;
        s.tell(id, Outcome::Failed).unwrap();
        s
    }

    #[test]
    fn tables_list_complete_trials_only() {
        let s = study();
        let t = trial_table(&s);
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.header, ["trial_id", "batch_size", "state", "value"]);
        assert!(t
            .render(ReportFormat::Csv)
            .starts_with("trial_id,batch_size,state,value\n0,8,complete,0.5\n"));
        assert!(t
            .render(ReportFormat::Md)
            .contains("| 3 | 64 | complete | 0.8 |"));
    }

    #[test]
    fn summary_has_one_row_per_batch_size() {
        let t = best_per_value(&study(), "batch_size").unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.rows[3], ["64", "0.8", "2"]);
    }

    #[test]
    fn history_is_monotone_and_parseable() {
        let s = study();
        let series = parse_history_svg(&history_svg(&s));
        assert_eq!(series, best_so_far(&s));
        assert_eq!(
            series.iter().map(|p| p.1).collect::<Vec<_>>(),
            [0.5, 0.7, 0.7, 0.8, 0.8, 0.8]
        );
    }

    #[test]
    fn best_json_round_trips() {
        let b = BestTrial::of(&study()).unwrap();
        assert_eq!(b.trial_id, 3);
        let back: BestTrial = serde_json::from_str(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }
}
