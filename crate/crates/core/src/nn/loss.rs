//! Masked training costs: the dynamic weighted multitask cost and the
//! class-weighted binary cost used for bioactivity pretraining.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::NnError;
use crate::data::{Task, TASK_COUNT};
use crate::scalar::{real, Real};

/// Per-task cost weights for (BA, PPBR, VDss, HL).
pub const DEFAULT_TASK_WEIGHTS: [f64; TASK_COUNT] = [3.0, 1.0, 9.0, 1.0];

/// Non-negative weights mixing the four task costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TaskWeights<T: Real>(pub [T; TASK_COUNT]);

impl<T: Real> TaskWeights<T> {
    pub fn new(w: [T; TASK_COUNT]) -> Result<Self, NnError> {
        if w.iter().any(|v| *v < T::zero() || !v.is_finite()) {
            return Err(NnError::BadSpec("task weights must be non-negative".into()));
        }
        if w.iter().all(|v| *v == T::zero()) {
            return Err(NnError::BadSpec("task weights must not all be zero".into()));
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Weight components for a subset of tasks, in the given order.
    pub fn for_tasks(&self, tasks: &[Task]) -> Vec<T> {
        tasks.iter().map(|t| self.0[t.index()]).collect()
    }
}

impl<T: Real> Default for TaskWeights<T> {
    /// 3 : 1 : 9 : 1.
    fn default() -> Self {
        Self([
            real(DEFAULT_TASK_WEIGHTS[0]),
            real(DEFAULT_TASK_WEIGHTS[1]),
            real(DEFAULT_TASK_WEIGHTS[2]),
            real(DEFAULT_TASK_WEIGHTS[3]),
        ])
    }
}

/// Which training cost drives backpropagation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
#[serde(bound = "")]
pub enum LossSpec<T: Real> {
    /// Weighted sum of per-task halved-MSE terms over present labels.
    Multitask { weights: Vec<T> },
    /// Class-weighted halved squared error over present binary cells.
    Binary { positive: T, negative: T },
}

impl<T: Real> LossSpec<T> {
    pub fn cost(
        &self,
        pred: &Array2<T>,
        labels: &Array2<T>,
        mask: &Array2<bool>,
    ) -> Result<T, NnError> {
        match self {
            LossSpec::Multitask { weights } => multitask_cost(pred, labels, mask, weights),
            LossSpec::Binary { positive, negative } => {
                weighted_binary_cost(pred, labels, mask, *positive, *negative)
            }
        }
    }

    /// `dL/dpred`; masked cells get exactly zero.
    pub(crate) fn output_grad(
        &self,
        pred: &Array2<T>,
        labels: &Array2<T>,
        mask: &Array2<bool>,
    ) -> Result<Array2<T>, NnError> {
        check_shapes(pred, labels, mask)?;
        let (n, k) = pred.dim();
        let mut grad = Array2::zeros((n, k));
        match self {
            LossSpec::Multitask { weights } => {
                check_weights(weights, k)?;
                for col in 0..k {
                    let present = (0..n).filter(|&i| mask[(i, col)]).count();
                    if present == 0 {
                        continue;
                    }
                    let scale = weights[col] / real(present as f64);
                    for i in 0..n {
                        if mask[(i, col)] {
                            grad[(i, col)] = scale * (pred[(i, col)] - labels[(i, col)]);
                        }
                    }
                }
            }
            LossSpec::Binary { positive, negative } => {
                check_binary(labels, mask)?;
                let present = mask.iter().filter(|&&m| m).count();
                if present > 0 {
                    let inv = T::one() / real(present as f64);
                    for i in 0..n {
                        for col in 0..k {
                            if mask[(i, col)] {
                                let w = if labels[(i, col)] == T::one() {
                                    *positive
                                } else {
                                    *negative
                                };
                                grad[(i, col)] = w * inv * (pred[(i, col)] - labels[(i, col)]);
                            }
                        }
                    }
                }
            }
        }
        Ok(grad)
    }
}

fn check_shapes<T: Real>(
    pred: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
) -> Result<(), NnError> {
    if pred.dim() != labels.dim() || pred.dim() != mask.dim() {
        return Err(NnError::ShapeMismatch(format!(
            "pred {:?}, labels {:?}, mask {:?}",
            pred.dim(),
            labels.dim(),
            mask.dim()
        )));
    }
    Ok(())
}

fn check_weights<T: Real>(weights: &[T], k: usize) -> Result<(), NnError> {
    if weights.len() != k {
        return Err(NnError::ShapeMismatch(format!(
            "{} task weights for {} output columns",
            weights.len(),
            k
        )));
    }
    Ok(())
}

fn check_binary<T: Real>(labels: &Array2<T>, mask: &Array2<bool>) -> Result<(), NnError> {
    for (l, &m) in labels.iter().zip(mask.iter()) {
        if m && *l != T::zero() && *l != T::one() {
            return Err(NnError::NonBinaryLabel);
        }
    }
    Ok(())
}

/// Dynamic weighted multitask cost: per task, the mean over samples with a
/// present label of `(pred - label)^2 / 2`; tasks absent from the batch
/// contribute nothing; the total is the weighted sum of task terms.
pub fn multitask_cost<T: Real>(
    pred: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
    weights: &[T],
) -> Result<T, NnError> {
    check_shapes(pred, labels, mask)?;
    let (n, k) = pred.dim();
    check_weights(weights, k)?;
    let half = real::<T>(0.5);
    let mut total = T::zero();
    for col in 0..k {
        let mut sum = T::zero();
        let mut count = 0usize;
        for i in 0..n {
            if mask[(i, col)] {
                let e = pred[(i, col)] - labels[(i, col)];
                sum += e * e * half;
                count += 1;
            }
        }
        if count > 0 {
            total += weights[col] * sum / real(count as f64);
        }
    }
    Ok(total)
}

/// Class-weighted binary cost: the mean over present cells of
/// `w * (pred - label)^2 / 2` with `w = positive` where the label is 1 and
/// `w = negative` where it is 0.
pub fn weighted_binary_cost<T: Real>(
    pred: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
    positive: T,
    negative: T,
) -> Result<T, NnError> {
    check_shapes(pred, labels, mask)?;
    check_binary(labels, mask)?;
    let half = real::<T>(0.5);
    let mut sum = T::zero();
    let mut count = 0usize;
    for ((p, l), &m) in pred.iter().zip(labels.iter()).zip(mask.iter()) {
        if m {
            let w = if *l == T::one() { positive } else { negative };
            let e = *p - *l;
            sum += w * e * e * half;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(T::zero());
    }
    Ok(sum / real(count as f64))
}
