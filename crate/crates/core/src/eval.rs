//! Evaluation metrics: absolute-error threshold accuracy, MAE, recall, a
//! k-nearest-neighbors baseline used as a cross-check, and report assembly.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::NormalizationSpec;
use crate::fingerprint::Fingerprint;
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("no positive labels")]
    NoPositives,
    #[error("k = {k} invalid for {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("task `{0}` has no present labels in this slice")]
    EmptyTask(String),
    #[error("cutoff must lie strictly inside (0, 1)")]
    BadCutoff,
}

/// Percentage of predictions with `|pred - label| <= t`.
pub fn accuracy_at<T: Real>(pred: &[T], label: &[T], t: T) -> Result<T, EvalError> {
    if pred.is_empty() || pred.len() != label.len() {
        return Err(EvalError::EmptyInput);
    }
    let hits = pred
        .iter()
        .zip(label)
        .filter(|(p, l)| (**p - **l).abs() <= t)
        .count();
    Ok(real::<T>(100.0) * real(hits as f64) / real(pred.len() as f64))
}

/// Mean absolute error.
pub fn mae<T: Real>(pred: &[T], label: &[T]) -> Result<T, EvalError> {
    if pred.is_empty() || pred.len() != label.len() {
        return Err(EvalError::EmptyInput);
    }
    let sum: T = pred.iter().zip(label).map(|(p, l)| (*p - *l).abs()).sum();
    Ok(sum / real(pred.len() as f64))
}

/// Recall = TP / (TP + FN) over entries with label 1; a prediction counts
/// as positive when it is at least `cutoff`.
pub fn recall<T: Real>(pred: &[T], label: &[T], cutoff: T) -> Result<T, EvalError> {
    if pred.is_empty() || pred.len() != label.len() {
        return Err(EvalError::EmptyInput);
    }
    if cutoff <= T::zero() || cutoff >= T::one() {
        return Err(EvalError::BadCutoff);
    }
    let mut positives = 0usize;
    let mut hits = 0usize;
    for (p, l) in pred.iter().zip(label) {
        if *l == T::one() {
            positives += 1;
            if *p >= cutoff {
                hits += 1;
            }
        }
    }
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    Ok(real::<T>(hits as f64) / real(positives as f64))
}

/// Mean label of the `k` nearest training fingerprints under Euclidean
/// distance on the bit vectors; distance ties resolved by lower index.
pub fn knn_predict<T: Real>(
    train: &[(Fingerprint, T)],
    query: &Fingerprint,
    k: usize,
) -> Result<T, EvalError> {
    if k == 0 || k > train.len() {
        return Err(EvalError::KTooLarge { k, n: train.len() });
    }
    // Squared Euclidean distance on 0/1 vectors is the Hamming distance, an
    // exact integer, so neighbor ordering involves no float comparisons.
    let mut order: Vec<(u32, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (fp, _))| (query.hamming_distance(fp), i))
        .collect();
    order.sort_unstable();
    let sum: T = order[..k].iter().map(|&(_, i)| train[i].1).sum();
    Ok(sum / real(k as f64))
}

/// Metrics for one task over one data slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TaskReport<T: Real> {
    pub task: String,
    /// Accuracy (percent) at each threshold, same order as the report's
    /// `thresholds` field; non-decreasing.
    pub accuracy: Vec<T>,
    /// Mean absolute error in normalized units.
    pub mae: T,
    /// Present labels counted.
    pub count: usize,
    /// Recall at cutoff 0.5, for binary tasks only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<T>,
}

/// Per-task metrics over one data slice, on the normalized label scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EvalReport<T: Real> {
    /// Absolute-error thresholds, ascending.
    pub thresholds: Vec<T>,
    /// Normalization divisors the labels were scaled by, recorded so the
    /// normalized-scale numbers are unambiguous.
    pub divisors: [T; 4],
    pub tasks: Vec<TaskReport<T>>,
}

/// The report thresholds: 0.1, 0.2, 0.3 on the normalized scale.
pub fn default_thresholds<T: Real>() -> Vec<T> {
    vec![real(0.1), real(0.2), real(0.3)]
}

/// Builds a report from per-task prediction columns, skipping masked labels.
pub fn evaluate_predictions<T: Real>(
    preds: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
    task_names: &[&str],
    thresholds: &[T],
    normalization: &NormalizationSpec<T>,
) -> Result<EvalReport<T>, EvalError> {
    if preds.dim() != labels.dim() || preds.dim() != mask.dim() {
        return Err(EvalError::EmptyInput);
    }
    let (n, k) = preds.dim();
    if task_names.len() != k {
        return Err(EvalError::EmptyInput);
    }
    let mut tasks = Vec::with_capacity(k);
    for (col, name) in task_names.iter().enumerate() {
        let mut p = Vec::new();
        let mut l = Vec::new();
        for i in 0..n {
            if mask[(i, col)] {
                p.push(preds[(i, col)]);
                l.push(labels[(i, col)]);
            }
        }
        if p.is_empty() {
            return Err(EvalError::EmptyTask((*name).to_string()));
        }
        let accuracy = thresholds
            .iter()
            .map(|&t| accuracy_at(&p, &l, t))
            .collect::<Result<Vec<_>, _>>()?;
        tasks.push(TaskReport {
            task: (*name).to_string(),
            accuracy,
            mae: mae(&p, &l)?,
            count: p.len(),
            recall: None,
        });
    }
    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        divisors: normalization.divisors,
        tasks,
    })
}

/// Renders reports for the train/validation/test slices as a fixed-width
/// table: one row per task, (Accuracy, MAE) per slice. Accuracy is taken at
/// the first (strictest) threshold.
pub fn render_table<T: Real>(slices: &[(&str, &EvalReport<T>)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<10}", "task"));
    for (name, _) in slices {
        out.push_str(&format!("{:>12}{:>10}", format!("{name} acc%"), "mae"));
    }
    out.push('\n');
    let task_count = slices.first().map_or(0, |(_, r)| r.tasks.len());
    for row in 0..task_count {
        let name = &slices[0].1.tasks[row].task;
        out.push_str(&format!("{name:<10}"));
        for (_, report) in slices {
            let task = &report.tasks[row];
            let acc = task.accuracy.first().copied().unwrap_or_else(T::zero);
            out.push_str(&format!(
                "{:>12.2}{:>10.4}",
                acc.to_f64().unwrap_or(f64::NAN),
                task.mae.to_f64().unwrap_or(f64::NAN)
            ));
        }
        out.push('\n');
    }
    out
}
