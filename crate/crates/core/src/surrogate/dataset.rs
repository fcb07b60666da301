//! Labelled raster collections: synthetic oriented-bar classes or images
//! loaded from a split manifest.

use std::f64::consts::PI;
use std::path::Path;

use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::augment::resize_to;
use crate::data::{stratified_indices, ManifestEntry, SplitRatios, Task};
use crate::error::{Error, Result};
use crate::image::{read_pgm, Image};
use crate::study::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub image_side: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.n_classes, 2 | 4) {
            return Err(Error::validation(format!(
                "synthetic data supports 2 or 4 classes, got {}",
                self.n_classes
            )));
        }
        if self.n_per_class == 0 || self.image_side < 2 {
            return Err(Error::validation(
                "synthetic data needs n_per_class ≥ 1 and image_side ≥ 2",
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::validation("noise_std must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub side: usize,
    pub n_classes: usize,
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
}

/// Bars at angle `class · π / n_classes`, two periods across the image.
pub fn class_template(class: usize, n_classes: usize, side: usize) -> Image {
    let theta = class as f64 * PI / n_classes as f64;
    let (s, c) = theta.sin_cos();
    let mid = (side - 1) as f64 / 2.0;
    Image::from_fn(side, side, |x, y| {
        let u = (x as f64 - mid) * c + (y as f64 - mid) * s;
        0.5 + 0.5 * (2.0 * PI * 2.0 * u / side as f64).cos()
    })
    .expect("template dimensions are positive")
}

/// Class templates plus clamped Gaussian pixel noise, samples interleaved
/// by class.
pub fn make_synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let templates: Vec<Image> = (0..spec.n_classes)
        .map(|c| class_template(c, spec.n_classes, spec.image_side))
        .collect();
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::validation(e.to_string()))?;
    let mut rng = derive_rng(spec.seed, &[0x5EED]);
    let mut images = Vec::with_capacity(spec.n_classes * spec.n_per_class);
    let mut labels = Vec::with_capacity(images.capacity());
    for _ in 0..spec.n_per_class {
        for (c, t) in templates.iter().enumerate() {
            let pixels = if spec.noise_std == 0.0 {
                t.pixels().to_vec()
            } else {
                t.pixels()
                    .iter()
                    .map(|&p| (p + noise.sample(&mut rng)).clamp(0.0, 1.0))
                    .collect()
            };
            images.push(Image::new(spec.image_side, spec.image_side, pixels)?);
            labels.push(c);
        }
    }
    Ok(Dataset {
        side: spec.image_side,
        n_classes: spec.n_classes,
        images,
        labels,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            side: self.side,
            n_classes: self.n_classes,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stratified train/val/test partition.
    pub fn split(&self, ratios: &SplitRatios, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
        let idx = stratified_indices(&self.labels, ratios, seed)?;
        Ok((
            self.subset(&idx.train),
            self.subset(&idx.val),
            self.subset(&idx.test),
        ))
    }

    /// Loads each entry's PGM (relative to `base_dir`) and resizes to `side`.
    pub fn from_manifest(
        entries: &[ManifestEntry],
        base_dir: &Path,
        side: usize,
        task: Task,
    ) -> Result<Dataset> {
        let mut images = Vec::with_capacity(entries.len());
        for e in entries {
            images.push(resize_to(&read_pgm(&base_dir.join(&e.image_path))?, side)?);
        }
        Ok(Dataset {
            side,
            n_classes: task.n_classes(),
            images,
            labels: entries.iter().map(|e| task.class_of(e.label)).collect(),
        })
    }
}
