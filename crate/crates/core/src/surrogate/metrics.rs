use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    /// `confusion[label][prediction]`.
    pub confusion: Vec<Vec<u64>>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
}

impl ClassificationMetrics {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Trace over total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum();
        trace as f64 / total as f64
    }
}

/// Confusion matrix, per-class F1 (0 when precision + recall is 0) and macro F1.
pub fn confusion_and_f1(
    predictions: &[usize],
    labels: &[usize],
    k: usize,
) -> Result<ClassificationMetrics> {
    if predictions.len() != labels.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p >= k || y >= k {
            return Err(Error::validation(format!(
                "class index out of range for K={k}"
            )));
        }
        confusion[y][p] += 1;
    }
    let f1: Vec<f64> = (0..k)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let predicted: u64 = (0..k).map(|r| confusion[r][c]).sum();
            let actual: u64 = confusion[c].iter().sum();
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect();
    let macro_f1 = if k == 0 {
        0.0
    } else {
        f1.iter().sum::<f64>() / k as f64
    };
    Ok(ClassificationMetrics {
        confusion,
        f1,
        macro_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 3, 3, 1];
        let m = confusion_and_f1(&labels, &labels, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m.confusion[i][j], 0);
                }
            }
        }
        assert_eq!(m.macro_f1, 1.0);
        assert_eq!(m.accuracy(), 1.0);
    }

    #[test]
    fn all_class_zero_on_balanced_binary() {
        let labels = [0, 0, 1, 1];
        let m = confusion_and_f1(&[0; 4], &labels, 2).unwrap();
        assert!((m.f1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.f1[1], 0.0);
        assert!((m.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.confusion, vec![vec![2, 0], vec![2, 0]]);
    }

    #[test]
    fn empty_and_mismatched() {
        let m = confusion_and_f1(&[], &[], 3).unwrap();
        assert_eq!(m.confusion, vec![vec![0; 3]; 3]);
        assert_eq!(m.macro_f1, 0.0);
        assert!(confusion_and_f1(&[0], &[], 2).is_err());
        assert!(confusion_and_f1(&[2], &[0], 2).is_err());
    }
}
