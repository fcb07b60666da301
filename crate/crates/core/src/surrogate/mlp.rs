//! One-hidden-layer perceptron with inverted dropout and exact backprop.

use rand::Rng;

use crate::error::{Error, Result};

/// `−log softmax(logits)[label]`, stabilised by max subtraction.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("logits must be finite"));
    }
    if label >= logits.len() {
        return Err(Error::validation(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    Ok((max - logits[label]) + sum.ln())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Intermediate quantities of a forward pass, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Hidden pre-activations, one row per sample.
    pub hidden_pre: Vec<Vec<f64>>,
    /// Hidden activations after ReLU and dropout scaling.
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<Vec<f64>>,
    /// Per-unit multipliers (0 or 1/(1-p)); `None` in eval mode.
    pub masks: Option<Vec<Vec<f64>>>,
}

/// `input → affine → ReLU → dropout → affine → logits`.
///
/// All parameters live in one flat vector laid out as
/// `[w1 (hidden×input), b1, w2 (classes×hidden), b2]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
    pub params: Vec<f64>,
}

impl MlpModel {
    pub fn n_params(input_dim: usize, hidden_dim: usize, n_classes: usize) -> usize {
        hidden_dim * input_dim + hidden_dim + n_classes * hidden_dim + n_classes
    }

    pub fn zeros(
        input_dim: usize,
        hidden_dim: usize,
        n_classes: usize,
        dropout_rate: f64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || n_classes < 2 {
            return Err(Error::validation(
                "MLP needs positive input/hidden sizes and ≥ 2 classes",
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::validation(format!(
                "dropout rate {dropout_rate} must be in [0, 1)"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            n_classes,
            dropout_rate,
            params: vec![0.0; Self::n_params(input_dim, hidden_dim, n_classes)],
        })
    }

    /// Weights ~ U(−a, a) with `a = sqrt(6 / fan_in)`; biases start at 0.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        n_classes: usize,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut m = Self::zeros(input_dim, hidden_dim, n_classes, dropout_rate)?;
        let a1 = (6.0 / input_dim as f64).sqrt();
        let a2 = (6.0 / hidden_dim as f64).sqrt();
        let (w1, b1, w2, _) = m.ranges();
        for p in &mut m.params[w1] {
            *p = rng.random_range(-a1..a1);
        }
        for p in &mut m.params[w2.start..w2.end] {
            *p = rng.random_range(-a2..a2);
        }
        debug_assert!(m.params[b1].iter().all(|&b| b == 0.0));
        Ok(m)
    }

    fn ranges(
        &self,
    ) -> (
        std::ops::Range<usize>,
        std::ops::Range<usize>,
        std::ops::Range<usize>,
        std::ops::Range<usize>,
    ) {
        let w1 = 0..self.hidden_dim * self.input_dim;
        let b1 = w1.end..w1.end + self.hidden_dim;
        let w2 = b1.end..b1.end + self.n_classes * self.hidden_dim;
        let b2 = w2.end..w2.end + self.n_classes;
        (w1, b1, w2, b2)
    }

    /// Draws inverted-dropout masks for a batch, or `None` when the rate is 0.
    pub fn sample_masks<R: Rng + ?Sized>(
        &self,
        batch: usize,
        rng: &mut R,
    ) -> Option<Vec<Vec<f64>>> {
        if self.dropout_rate == 0.0 {
            return None;
        }
        let keep = 1.0 - self.dropout_rate;
        let scale = 1.0 / keep;
        Some(
            (0..batch)
                .map(|_| {
                    (0..self.hidden_dim)
                        .map(|_| if rng.random_bool(keep) { scale } else { 0.0 })
                        .collect()
                })
                .collect(),
        )
    }

    /// Forward pass with explicit masks (`None` = eval mode).
    pub fn forward(&self, batch: &[&[f64]], masks: Option<Vec<Vec<f64>>>) -> Result<ForwardPass> {
        if let Some(bad) = batch.iter().find(|x| x.len() != self.input_dim) {
            return Err(Error::validation(format!(
                "input has {} features, model expects {}",
                bad.len(),
                self.input_dim
            )));
        }
        if let Some(m) = &masks {
            if m.len() != batch.len() || m.iter().any(|r| r.len() != self.hidden_dim) {
                return Err(Error::validation("dropout mask shape does not match batch"));
            }
        }
        let (w1, b1, w2, b2) = self.ranges();
        let (w1, b1, w2, b2) = (
            &self.params[w1],
            &self.params[b1],
            &self.params[w2],
            &self.params[b2],
        );
        let mut hidden_pre = Vec::with_capacity(batch.len());
        let mut hidden = Vec::with_capacity(batch.len());
        let mut logits = Vec::with_capacity(batch.len());
        for (n, x) in batch.iter().enumerate() {
            let pre: Vec<f64> = (0..self.hidden_dim)
                .map(|j| {
                    let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
                    b1[j] + row.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            let h: Vec<f64> = pre
                .iter()
                .enumerate()
                .map(|(j, &z)| {
                    let a = z.max(0.0);
                    match &masks {
                        Some(m) => a * m[n][j],
                        None => a,
                    }
                })
                .collect();
            let out: Vec<f64> = (0..self.n_classes)
                .map(|k| {
                    let row = &w2[k * self.hidden_dim..(k + 1) * self.hidden_dim];
                    b2[k] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>()
                })
                .collect();
            hidden_pre.push(pre);
            hidden.push(h);
            logits.push(out);
        }
        Ok(ForwardPass {
            hidden_pre,
            hidden,
            logits,
            masks,
        })
    }

    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        batch: &[&[f64]],
        rng: &mut R,
    ) -> Result<ForwardPass> {
        let masks = self.sample_masks(batch.len(), rng);
        self.forward(batch, masks)
    }

    pub fn forward_eval(&self, batch: &[&[f64]]) -> Result<ForwardPass> {
        self.forward(batch, None)
    }

    /// Mean cross-entropy over a forward pass.
    pub fn loss(&self, pass: &ForwardPass, labels: &[usize]) -> Result<f64> {
        if pass.logits.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (z, &y) in pass.logits.iter().zip(labels) {
            total += cross_entropy(z, y)?;
        }
        Ok(total / pass.logits.len() as f64)
    }

    /// Gradient of the mean cross-entropy, masks held fixed.
    pub fn backward(
        &self,
        batch: &[&[f64]],
        labels: &[usize],
        pass: &ForwardPass,
    ) -> Result<Vec<f64>> {
        if labels.len() != batch.len() || pass.logits.len() != batch.len() {
            return Err(Error::validation(
                "labels, inputs and forward pass must align",
            ));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::validation(format!("label {y} out of range")));
        }
        let (w1r, b1r, w2r, b2r) = self.ranges();
        let w2 = &self.params[w2r.clone()];
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / batch.len().max(1) as f64;
        for (n, x) in batch.iter().enumerate() {
            let mut d_logits = softmax(&pass.logits[n]);
            d_logits[labels[n]] -= 1.0;
            for d in &mut d_logits {
                *d *= scale;
            }
            let h = &pass.hidden[n];
            let mut d_hidden = vec![0.0; self.hidden_dim];
            for (k, &dk) in d_logits.iter().enumerate() {
                grad[b2r.start + k] += dk;
                let row = w2r.start + k * self.hidden_dim;
                for j in 0..self.hidden_dim {
                    grad[row + j] += dk * h[j];
                    d_hidden[j] += dk * w2[k * self.hidden_dim + j];
                }
            }
            for j in 0..self.hidden_dim {
                let mut d = if pass.hidden_pre[n][j] > 0.0 {
                    d_hidden[j]
                } else {
                    0.0
                };
                if let Some(m) = &pass.masks {
                    d *= m[n][j];
                }
                if d == 0.0 {
                    continue;
                }
                grad[b1r.start + j] += d;
                let row = w1r.start + j * self.input_dim;
                for (i, &xi) in x.iter().enumerate() {
                    grad[row + i] += d * xi;
                }
            }
        }
        Ok(grad)
    }

    pub fn predict(&self, inputs: &[&[f64]]) -> Result<Vec<usize>> {
        Ok(self
            .forward_eval(inputs)?
            .logits
            .iter()
            .map(|z| argmax(z))
            .collect())
    }
}
