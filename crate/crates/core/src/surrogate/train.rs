//! Mini-batch training of the surrogate classifier under a hyperparameter
//! assignment, reporting validation accuracy after every epoch.

use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{augment, AffineRanges};
use crate::error::{Error, Result};
use crate::space::ParamAssignment;
use crate::study::derive_rng;

use super::adam::{adam_step, AdamState};
use super::dataset::Dataset;
use super::metrics::{confusion_and_f1, ClassificationMetrics};
use super::mlp::MlpModel;

/// Parameter names the surrogate understands.
pub const KNOWN_PARAMS: [&str; 9] = [
    "lr",
    "dropout",
    "batch_size",
    "rotation",
    "scale",
    "shear",
    "translate",
    "hflip",
    "vflip",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lr: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub augmentation: AffineRanges,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            dropout: 0.0,
            batch_size: 32,
            augmentation: AffineRanges::none(),
        }
    }
}

impl Hyperparams {
    /// Reads known names from an assignment; absent names keep defaults.
    pub fn from_assignment(p: &ParamAssignment) -> Result<Self> {
        let mut hp = Hyperparams::default();
        for (name, value) in p.iter() {
            let num = || {
                value.as_f64().ok_or_else(|| {
                    Error::validation(format!("'{name}' must be numeric, got {value}"))
                })
            };
            let flag = || {
                value.as_bool().ok_or_else(|| {
                    Error::validation(format!("'{name}' must be boolean, got {value}"))
                })
            };
            match name {
                "lr" => hp.lr = num()?,
                "dropout" => hp.dropout = num()?,
                "batch_size" => {
                    let b = num()?;
                    if b < 1.0 || b.fract() != 0.0 {
                        return Err(Error::validation(format!(
                            "batch_size must be a positive integer, got {b}"
                        )));
                    }
                    hp.batch_size = b as usize;
                }
                "rotation" => hp.augmentation.max_rotation_deg = num()?,
                "scale" => hp.augmentation.max_scale_frac = num()?,
                "shear" => hp.augmentation.max_shear_frac = num()?,
                "translate" => hp.augmentation.max_translate_frac = num()?,
                "hflip" => hp.augmentation.allow_hflip = flag()?,
                "vflip" => hp.augmentation.allow_vflip = flag()?,
                other => {
                    return Err(Error::validation(format!(
                        "unknown surrogate parameter '{other}'"
                    )))
                }
            }
        }
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::validation(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be positive"));
        }
        self.augmentation.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub hidden_dim: usize,
    /// Seeds initialization, shuffling, dropout and augmentation.
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 20,
            hidden_dim: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_accuracies: Vec<f64>,
    pub final_accuracy: f64,
    pub metrics: ClassificationMetrics,
    /// True when the reporter asked training to stop.
    pub stopped_early: bool,
}

fn evaluate(model: &MlpModel, data: &Dataset) -> Result<ClassificationMetrics> {
    let inputs: Vec<&[f64]> = data.images.iter().map(|i| i.pixels()).collect();
    let preds = model.predict(&inputs)?;
    confusion_and_f1(&preds, &data.labels, data.n_classes)
}

/// Trains on `train`, scoring on `val` after each epoch.
///
/// `reporter(epoch, accuracy)` is called with 1-based epochs; returning
/// `Break` stops training and marks the report `stopped_early`.
pub fn train_and_evaluate(
    hp: &Hyperparams,
    train: &Dataset,
    val: &Dataset,
    settings: &TrainSettings,
    reporter: &mut dyn FnMut(u64, f64) -> ControlFlow<()>,
) -> Result<TrainReport> {
    hp.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::validation(
            "training and validation sets must be non-empty",
        ));
    }
    if train.side != val.side || train.n_classes != val.n_classes {
        return Err(Error::validation(
            "training and validation sets differ in shape",
        ));
    }
    let input_dim = train.side * train.side;
    let mut init_rng = derive_rng(settings.seed, &[1]);
    let mut rng = derive_rng(settings.seed, &[2]);
    let mut model = MlpModel::init(
        input_dim,
        settings.hidden_dim,
        train.n_classes,
        hp.dropout,
        &mut init_rng,
    )?;
    let mut adam = AdamState::new(model.params.len());
    let augmenting = !hp.augmentation.is_identity();

    let mut epoch_accuracies = Vec::with_capacity(settings.epochs);
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            let owned: Vec<Vec<f64>> = if augmenting {
                chunk
                    .iter()
                    .map(|&i| {
                        augment(&train.images[i], &hp.augmentation, &mut rng)
                            .map(|im| im.into_pixels())
                    })
                    .collect::<Result<_>>()?
            } else {
                Vec::new()
            };
            let batch: Vec<&[f64]> = if augmenting {
                owned.iter().map(Vec::as_slice).collect()
            } else {
                chunk.iter().map(|&i| train.images[i].pixels()).collect()
            };
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let pass = model.forward_train(&batch, &mut rng)?;
            let loss = match model.loss(&pass, &labels) {
                Ok(l) if l.is_finite() => l,
                _ => {
                    return Err(Error::Divergence(format!(
                        "non-finite loss in epoch {epoch}"
                    )))
                }
            };
            debug_assert!(loss >= 0.0);
            let grads = model.backward(&batch, &labels, &pass)?;
            adam_step(&mut model.params, &grads, &mut adam, hp.lr)?;
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite parameters after epoch {epoch}"
            )));
        }
        let acc = evaluate(&model, val)?.accuracy();
        epoch_accuracies.push(acc);
        if reporter(epoch as u64, acc).is_break() {
            stopped_early = true;
            break;
        }
    }
    let metrics = evaluate(&model, val)?;
    Ok(TrainReport {
        epoch_accuracies,
        final_accuracy: metrics.accuracy(),
        metrics,
        stopped_early,
    })
}
