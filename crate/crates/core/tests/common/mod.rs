#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use studyforge::data::{Label, ManifestEntry};
use studyforge::sampler::suggest_random;
use studyforge::{Direction, Distribution, Outcome, SearchSpace, Study};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One to four parameters of random kinds and bounds.
pub fn random_space(rng: &mut ChaCha8Rng) -> SearchSpace {
    let mut space = SearchSpace::new();
    for i in 0..rng.random_range(1..=4) {
        let dist = match rng.random_range(0..5) {
            0 => {
                let low = rng.random_range(-100.0..100.0);
                let width = 10f64.powf(rng.random_range(-6.0..3.0));
                Distribution::Uniform {
                    low,
                    high: low + width,
                }
            }
            1 => {
                let low = 10f64.powf(rng.random_range(-8.0..2.0));
                let ratio = 10f64.powf(rng.random_range(0.01..6.0));
                Distribution::LogUniform {
                    low,
                    high: low * ratio,
                }
            }
            2 => {
                let k = rng.random_range(1..=6);
                let mut choices: Vec<i64> = Vec::new();
                while choices.len() < k {
                    let c = rng.random_range(-50..50);
                    if !choices.contains(&c) {
                        choices.push(c);
                    }
                }
                Distribution::IntChoice { choices }
            }
            3 => Distribution::Choice {
                choices: (0..rng.random_range(1..=5))
                    .map(|j| format!("c{j}"))
                    .collect(),
            },
            _ => Distribution::Boolean,
        };
        space.add(format!("p{i}"), dist).unwrap();
    }
    space
}

/// A study with `n` trials in mixed states: complete, pruned (with
/// intermediates), failed and running.
pub fn random_study(
    rng: &mut ChaCha8Rng,
    space: SearchSpace,
    direction: Direction,
    n: usize,
) -> Study {
    let mut study = Study::create(space, direction, rng.random()).unwrap();
    for _ in 0..n {
        let params = suggest_random(study.space(), rng).unwrap();
        let id = study.start_trial_with(params).unwrap().trial_id;
        let steps = rng.random_range(0..4u64);
        for s in 1..=steps {
            study
                .report_intermediate(id, s, rng.random_range(-5.0..5.0))
                .unwrap();
        }
        match rng.random_range(0..10) {
            0..=5 => {
                let v = if rng.random_bool(0.1) {
                    1.0
                } else {
                    rng.random_range(-10.0..10.0)
                };
                study.tell(id, Outcome::Value(v)).unwrap();
            }
            6 | 7 => {
                study.tell(id, Outcome::Pruned).unwrap();
            }
            8 => {
                study.tell(id, Outcome::Failed).unwrap();
            }
            _ => {}
        }
    }
    study
}

pub fn entry(id: usize, label: Label, images: u32) -> ManifestEntry {
    ManifestEntry {
        study_id: format!("study{id:05}"),
        image_path: format!("images/{id:05}.pgm"),
        label,
        images_in_study: images,
    }
}

/// Class counts in label order, the first `multi` entries (after a seeded
/// shuffle) marked as multi-image studies.
pub fn manifest(counts: [usize; 4], multi: usize, seed: u64) -> Vec<ManifestEntry> {
    use rand::seq::SliceRandom;
    let mut labels: Vec<Label> = Label::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&l, c)| std::iter::repeat_n(l, c))
        .collect();
    let mut r = rng(seed);
    labels.shuffle(&mut r);
    let mut idx: Vec<usize> = (0..labels.len()).collect();
    idx.shuffle(&mut r);
    let multi: std::collections::HashSet<usize> = idx.into_iter().take(multi).collect();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            entry(
                i,
                l,
                if multi.contains(&i) {
                    r.random_range(2..5)
                } else {
                    1
                },
            )
        })
        .collect()
}

/// Study whose completed trials report `values` at `step`, plus one
/// running trial reporting `current` there.
pub fn pruning_study(
    direction: Direction,
    step: u64,
    values: &[f64],
    current: f64,
) -> (Study, usize) {
    let space = SearchSpace::new()
        .with(
            "x",
            Distribution::Uniform {
                low: 0.0,
                high: 1.0,
            },
        )
        .unwrap();
    let mut study = Study::create(space, direction, 0).unwrap();
    let x = || {
        [("x".to_string(), studyforge::ParamValue::Float(0.5))]
            .into_iter()
            .collect()
    };
    for &v in values {
        let id = study.start_trial_with(x()).unwrap().trial_id;
        study.report_intermediate(id, step, v).unwrap();
        study.tell(id, Outcome::Value(v)).unwrap();
    }
    let id = study.start_trial_with(x()).unwrap().trial_id;
    study.report_intermediate(id, step, current).unwrap();
    (study, id)
}
