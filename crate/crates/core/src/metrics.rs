//! Classification metrics and seed-level summaries.
//!
//! Macro-F1 averages F1 over *all* declared classes, including classes
//! absent from both truth and prediction (their F1 counts as 0). That keeps
//! scores comparable across splits of the same dataset even when a split
//! drops a class, and it matches how chance levels are computed here.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, tags};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("label vectors have different lengths ({truth} vs {pred})")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("label vectors are empty")]
    EmptyLabels,
    #[error("no runs to summarize")]
    EmptyRuns,
    #[error("class count must be positive")]
    ZeroClasses,
    #[error("Monte-Carlo draw count must be positive")]
    ZeroDraws,
}

/// k x k contingency table; rows index the true class, columns the
/// predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    /// Tallies `(truth, prediction)` pairs over `k` classes.
    pub fn from_labels(k: usize, truth: &[usize], pred: &[usize]) -> Result<Self, MetricError> {
        if k == 0 {
            return Err(MetricError::ZeroClasses);
        }
        if truth.len() != pred.len() {
            return Err(MetricError::LengthMismatch { truth: truth.len(), pred: pred.len() });
        }
        if truth.is_empty() {
            return Err(MetricError::EmptyLabels);
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k {
                return Err(MetricError::LabelOutOfRange { label: t, k });
            }
            if p >= k {
                return Err(MetricError::LabelOutOfRange { label: p, k });
            }
            counts[t * k + p] += 1;
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Count of samples with true class `truth` predicted as `pred`.
    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of correctly classified samples.
    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.k).map(|c| self.count(c, c)).sum();
        correct as f64 / self.total() as f64
    }

    /// Unweighted mean of per-class F1 over all `k` classes; a class with
    /// no true and no predicted samples contributes 0.
    pub fn macro_f1(&self) -> f64 {
        let mut sum = 0.0;
        for c in 0..self.k {
            let tp = self.count(c, c);
            let row: u64 = (0..self.k).map(|p| self.count(c, p)).sum();
            let col: u64 = (0..self.k).map(|t| self.count(t, c)).sum();
            let fp = col - tp;
            let fn_ = row - tp;
            let denom = 2 * tp + fp + fn_;
            if denom > 0 {
                sum += 2.0 * tp as f64 / denom as f64;
            }
        }
        sum / self.k as f64
    }
}

/// Accuracy of `pred` against `truth` over `k` classes.
pub fn accuracy(k: usize, truth: &[usize], pred: &[usize]) -> Result<f64, MetricError> {
    Ok(ConfusionMatrix::from_labels(k, truth, pred)?.accuracy())
}

/// Macro-F1 of `pred` against `truth` over `k` classes.
pub fn macro_f1(k: usize, truth: &[usize], pred: &[usize]) -> Result<f64, MetricError> {
    Ok(ConfusionMatrix::from_labels(k, truth, pred)?.macro_f1())
}

/// Mean and spread of one metric across repeated runs (one value per seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 for a single run.
    pub std: f64,
    /// The per-run values the summary was computed from; serialized as
    /// `per_seed` since runs are keyed by seed everywhere this is used.
    #[serde(rename = "per_seed")]
    pub values: Vec<f64>,
}

/// Summarizes per-seed metric values.
pub fn summarize_runs(values: &[f64]) -> Result<MetricSummary, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyRuns);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        libm::sqrt(ss / (n - 1.0))
    };
    Ok(MetricSummary { mean, std, values: values.to_vec() })
}

/// Which metric a chance level refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChanceMetric {
    Accuracy,
    MacroF1,
}

/// Expected score of a uniform random predictor over `k` classes.
///
/// Accuracy has the closed form `1/k`. Macro-F1 depends on the label
/// composition, so it is estimated by Monte-Carlo: `n_mc` uniform prediction
/// vectors are scored against `labels` and averaged.
pub fn chance_level(
    k: usize,
    metric: ChanceMetric,
    labels: &[usize],
    n_mc: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroClasses);
    }
    match metric {
        ChanceMetric::Accuracy => Ok(1.0 / k as f64),
        ChanceMetric::MacroF1 => {
            if labels.is_empty() {
                return Err(MetricError::EmptyLabels);
            }
            if n_mc == 0 {
                return Err(MetricError::ZeroDraws);
            }
            for &l in labels {
                if l >= k {
                    return Err(MetricError::LabelOutOfRange { label: l, k });
                }
            }
            let mut rng = rng::stream(seed, &[tags::CHANCE_MC]);
            let mut pred = vec![0usize; labels.len()];
            let mut sum = 0.0;
            for _ in 0..n_mc {
                for p in pred.iter_mut() {
                    *p = rng.random_range(0..k);
                }
                sum += macro_f1(k, labels, &pred)?;
            }
            Ok(sum / n_mc as f64)
        }
    }
}
