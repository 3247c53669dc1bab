//! Minibatch training: seeded shuffles, backprop, Adam steps, and per-epoch
//! history.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, backward, forward, Activation, LayerSpec, LossSpec, NetworkModel, NnError};
use crate::scalar::{real, Real};
use crate::split::fisher_yates;

/// A supervised batch: inputs, labels and the label-presence mask.
#[derive(Clone, Debug)]
pub struct TrainData<T: Real> {
    pub x: Array2<T>,
    pub labels: Array2<T>,
    pub mask: Array2<bool>,
}

impl<T: Real> TrainData<T> {
    pub fn new(x: Array2<T>, labels: Array2<T>, mask: Array2<bool>) -> Result<Self, NnError> {
        if x.nrows() != labels.nrows() || labels.dim() != mask.dim() {
            return Err(NnError::ShapeMismatch(format!(
                "x {:?}, labels {:?}, mask {:?}",
                x.dim(),
                labels.dim(),
                mask.dim()
            )));
        }
        Ok(Self { x, labels, mask })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rows(&self, indices: &[usize]) -> (Array2<T>, Array2<T>, Array2<bool>) {
        (
            self.x.select(Axis(0), indices),
            self.labels.select(Axis(0), indices),
            self.mask.select(Axis(0), indices),
        )
    }
}

fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.999
}
fn default_lambda() -> f64 {
    0.01
}
fn default_eps() -> f64 {
    1e-8
}

/// A full training-run description, deserializable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Layer sizes including input and output.
    pub layers: Vec<usize>,
    /// Per-layer activations; defaults to tanh hidden layers with a
    /// sigmoid output.
    #[serde(default)]
    pub activations: Option<Vec<Activation>>,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Multitask cost weights, one per output column.
    #[serde(default)]
    pub task_weights: Option<Vec<f64>>,
    /// (positive, negative) weights for the binary pretraining cost.
    #[serde(default)]
    pub pos_neg_weights: Option<[f64; 2]>,
    /// Leading layers excluded from updates (transfer-freeze ablation).
    #[serde(default)]
    pub frozen_layers: usize,
}

impl TrainConfig {
    pub fn layer_spec(&self) -> Result<LayerSpec, NnError> {
        match &self.activations {
            Some(acts) => LayerSpec::with_activations(self.layers.clone(), acts.clone()),
            None => LayerSpec::dense(self.layers.clone()),
        }
    }

    /// The loss this configuration describes: task weights select the
    /// multitask cost, positive/negative weights the binary cost.
    pub fn loss<T: Real>(&self) -> Result<LossSpec<T>, NnError> {
        match (&self.task_weights, &self.pos_neg_weights) {
            (Some(w), None) => Ok(LossSpec::Multitask {
                weights: w.iter().map(|&v| real(v)).collect(),
            }),
            (None, Some([p, n])) => Ok(LossSpec::Binary {
                positive: real(*p),
                negative: real(*n),
            }),
            (None, None) => Ok(LossSpec::Multitask {
                weights: vec![T::one(); self.layers.last().copied().unwrap_or(1)],
            }),
            (Some(_), Some(_)) => Err(NnError::BadSpec(
                "set either task_weights or pos_neg_weights, not both".into(),
            )),
        }
    }

    pub fn apply_hyperparameters<T: Real>(&self, model: &mut NetworkModel<T>) {
        model.adam.lr = real(self.lr);
        model.adam.beta1 = real(self.beta1);
        model.adam.beta2 = real(self.beta2);
        model.adam.lambda = real(self.lambda);
        model.adam.eps = real(self.eps);
    }
}

/// Per-epoch training record: train cost plus, when a validation set is
/// given, per-output accuracy at |error| <= 0.1 and MAE over present labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainHistory<T: Real> {
    pub train_loss: Vec<T>,
    pub val_accuracy: Vec<Vec<T>>,
    pub val_mae: Vec<Vec<T>>,
}

impl<T: Real> Default for TrainHistory<T> {
    fn default() -> Self {
        Self {
            train_loss: Vec::new(),
            val_accuracy: Vec::new(),
            val_mae: Vec::new(),
        }
    }
}

/// Trains in place: each epoch draws a seeded shuffle, walks minibatches,
/// and applies backprop + Adam. Deterministic for a fixed seed and config;
/// zero epochs leave the model untouched.
pub fn train<T: Real>(
    model: &mut NetworkModel<T>,
    data: &TrainData<T>,
    validation: Option<&TrainData<T>>,
    loss: &LossSpec<T>,
    cfg: &TrainConfig,
) -> Result<TrainHistory<T>, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyTrainingSet);
    }
    cfg.apply_hyperparameters(model);
    let n = data.len();
    let batch_size = cfg.batch_size.unwrap_or(n).max(1);
    let frozen = cfg.frozen_layers.min(model.spec.layer_count());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..n).collect();

    for _ in 0..cfg.epochs {
        fisher_yates(&mut order, &mut rng);
        for chunk in order.chunks(batch_size) {
            let (xb, yb, mb) = data.rows(chunk);
            let mut grads = backward(model, &xb, &yb, &mb, loss)?;
            for l in 0..frozen {
                grads.weights[l].fill(T::zero());
                grads.biases[l].fill(T::zero());
            }
            adam_step(model, &grads);
        }
        model.epoch_count += 1;

        let output = forward(model, &data.x)?;
        history
            .train_loss
            .push(loss.cost(&output, &data.labels, &data.mask)?);
        if let Some(val) = validation {
            let preds = forward(model, &val.x)?;
            let (acc, mae) = masked_column_metrics(&preds, &val.labels, &val.mask);
            history.val_accuracy.push(acc);
            history.val_mae.push(mae);
        }
    }
    Ok(history)
}

/// Accuracy at |error| <= 0.1 (percent) and MAE per column, over present
/// labels; columns without present labels report zero accuracy and MAE.
fn masked_column_metrics<T: Real>(
    preds: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
) -> (Vec<T>, Vec<T>) {
    let (n, k) = preds.dim();
    let threshold = real::<T>(0.1);
    let mut accuracy = Vec::with_capacity(k);
    let mut mae = Vec::with_capacity(k);
    for col in 0..k {
        let mut hits = 0usize;
        let mut total = 0usize;
        let mut abs_sum = T::zero();
        for i in 0..n {
            if mask[(i, col)] {
                let err = (preds[(i, col)] - labels[(i, col)]).abs();
                if err <= threshold {
                    hits += 1;
                }
                abs_sum += err;
                total += 1;
            }
        }
        if total == 0 {
            accuracy.push(T::zero());
            mae.push(T::zero());
        } else {
            accuracy.push(real::<T>(100.0) * real(hits as f64) / real(total as f64));
            mae.push(abs_sum / real(total as f64));
        }
    }
    (accuracy, mae)
}
