//! Dense feed-forward networks: tanh hidden layers, sigmoid outputs,
//! analytic backpropagation, Adam with L2 regularization, and the masked
//! multitask / class-weighted binary training costs.

mod adam;
mod loss;
mod train;

pub use adam::{adam_step, AdamState};
pub use loss::{multitask_cost, weighted_binary_cost, LossSpec, TaskWeights, DEFAULT_TASK_WEIGHTS};
pub use train::{train, TrainConfig, TrainData, TrainHistory};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("bad layer specification: {0}")]
    BadSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("binary labels must be exactly 0 or 1")]
    NonBinaryLabel,
    #[error("training set is empty")]
    EmptyTrainingSet,
}

/// Layer activation. The output layer is always sigmoid so predictions live
/// in (0, 1), matching the normalized label space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply<T: Real>(self, z: &mut Array2<T>) {
        match self {
            Activation::Tanh => z.mapv_inplace(|v| v.tanh()),
            Activation::Sigmoid => {
                z.mapv_inplace(|v| T::one() / (T::one() + (-v).exp()));
            }
        }
    }

    /// Derivative expressed in terms of the activation output.
    fn derivative_from_output<T: Real>(self, a: T) -> T {
        match self {
            Activation::Tanh => T::one() - a * a,
            Activation::Sigmoid => a * (T::one() - a),
        }
    }
}

/// Layer sizes (input, hidden..., output) and per-layer activations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl LayerSpec {
    /// Tanh on every hidden layer, sigmoid on the output layer.
    pub fn dense(sizes: Vec<usize>) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::BadSpec(
                "need at least input and output sizes".into(),
            ));
        }
        let mut activations = vec![Activation::Tanh; sizes.len() - 2];
        activations.push(Activation::Sigmoid);
        Self::with_activations(sizes, activations)
    }

    pub fn with_activations(
        sizes: Vec<usize>,
        activations: Vec<Activation>,
    ) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::BadSpec(
                "need at least input and output sizes".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(NnError::BadSpec("layer sizes must be at least 1".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(NnError::BadSpec(format!(
                "expected {} activations, got {}",
                sizes.len() - 1,
                activations.len()
            )));
        }
        if *activations.last().unwrap() != Activation::Sigmoid {
            return Err(NnError::BadSpec("output activation must be sigmoid".into()));
        }
        Ok(Self { sizes, activations })
    }

    /// Number of weight matrices.
    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }
}

/// A dense network with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel<T: Real> {
    pub spec: LayerSpec,
    /// Per layer, shape (out, in).
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
    pub adam: AdamState<T>,
    pub epoch_count: u64,
    pub rng_seed: u64,
}

/// Per-parameter gradients, matching the model's weight and bias shapes.
#[derive(Clone, Debug)]
pub struct Gradients<T: Real> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

/// Initializes weights uniformly in +-sqrt(6 / (fan_in + fan_out)) from a
/// seeded generator; biases start at zero. Identical seeds give
/// bit-identical models.
pub fn init_network<T: Real>(spec: LayerSpec, seed: u64) -> Result<NetworkModel<T>, NnError> {
    LayerSpec::with_activations(spec.sizes.clone(), spec.activations.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(spec.layer_count());
    let mut biases = Vec::with_capacity(spec.layer_count());
    for l in 0..spec.layer_count() {
        let (fan_in, fan_out) = (spec.sizes[l], spec.sizes[l + 1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
            real::<T>(rng.random::<f64>() * 2.0 * limit - limit)
        });
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    let adam = AdamState::zeroed(&spec);
    Ok(NetworkModel {
        spec,
        weights,
        biases,
        adam,
        epoch_count: 0,
        rng_seed: seed,
    })
}

/// All-zero initialization; forward output is 0.5 everywhere. Test hook and
/// building block for hand-set constant predictors.
pub fn init_network_zeroed<T: Real>(spec: LayerSpec) -> Result<NetworkModel<T>, NnError> {
    LayerSpec::with_activations(spec.sizes.clone(), spec.activations.clone())?;
    let weights = (0..spec.layer_count())
        .map(|l| Array2::zeros((spec.sizes[l + 1], spec.sizes[l])))
        .collect();
    let biases = (0..spec.layer_count())
        .map(|l| Array1::zeros(spec.sizes[l + 1]))
        .collect();
    let adam = AdamState::zeroed(&spec);
    Ok(NetworkModel {
        spec,
        weights,
        biases,
        adam,
        epoch_count: 0,
        rng_seed: 0,
    })
}

impl<T: Real> NetworkModel<T> {
    fn check_input(&self, x: &Array2<T>) -> Result<(), NnError> {
        if x.ncols() != self.spec.input_size() {
            return Err(NnError::ShapeMismatch(format!(
                "input width {} does not match network input size {}",
                x.ncols(),
                self.spec.input_size()
            )));
        }
        Ok(())
    }
}

/// Batched forward pass: `a_i = act(W_i a_{i-1} + b_i)` per layer.
pub fn forward<T: Real>(model: &NetworkModel<T>, x: &Array2<T>) -> Result<Array2<T>, NnError> {
    model.check_input(x)?;
    let mut a = x.clone();
    for l in 0..model.spec.layer_count() {
        let mut z = a.dot(&model.weights[l].t()) + &model.biases[l];
        model.spec.activations[l].apply(&mut z);
        a = z;
    }
    Ok(a)
}

/// Forward pass keeping every layer's activations; `result[0]` is the input
/// batch and `result[L]` the network output.
pub(crate) fn forward_trace<T: Real>(
    model: &NetworkModel<T>,
    x: &Array2<T>,
) -> Result<Vec<Array2<T>>, NnError> {
    model.check_input(x)?;
    let mut trace = Vec::with_capacity(model.spec.layer_count() + 1);
    trace.push(x.clone());
    for l in 0..model.spec.layer_count() {
        let mut z = trace[l].dot(&model.weights[l].t()) + &model.biases[l];
        model.spec.activations[l].apply(&mut z);
        trace.push(z);
    }
    Ok(trace)
}

/// Analytic gradients of `loss + (lambda / 2) * sum ||W||^2` for every weight
/// and bias. Masked sample-task cells contribute zero. The L2 term excludes
/// biases.
pub fn backward<T: Real>(
    model: &NetworkModel<T>,
    x: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
    loss: &LossSpec<T>,
) -> Result<Gradients<T>, NnError> {
    let trace = forward_trace(model, x)?;
    let output = trace.last().unwrap();
    let lambda = model.adam.lambda;

    // dL/da at the output, then walk layers backwards.
    let mut upstream = loss.output_grad(output, labels, mask)?;
    let layer_count = model.spec.layer_count();
    let mut d_weights = vec![Array2::zeros((0, 0)); layer_count];
    let mut d_biases = vec![Array1::zeros(0); layer_count];
    for l in (0..layer_count).rev() {
        let activation = model.spec.activations[l];
        let delta = {
            let mut d = upstream;
            d.zip_mut_with(&trace[l + 1], |g, &a| {
                *g *= activation.derivative_from_output(a);
            });
            d
        };
        let mut dw = delta.t().dot(&trace[l]);
        if lambda != T::zero() {
            dw.scaled_add(lambda, &model.weights[l]);
        }
        d_weights[l] = dw;
        d_biases[l] = delta.sum_axis(Axis(0));
        upstream = if l > 0 {
            delta.dot(&model.weights[l])
        } else {
            delta
        };
    }
    Ok(Gradients {
        weights: d_weights,
        biases: d_biases,
    })
}

/// Data cost plus the L2 penalty `(lambda / 2) * sum ||W||^2`; the scalar
/// objective whose gradient [`backward`] computes.
pub fn objective<T: Real>(
    model: &NetworkModel<T>,
    x: &Array2<T>,
    labels: &Array2<T>,
    mask: &Array2<bool>,
    loss: &LossSpec<T>,
) -> Result<T, NnError> {
    let output = forward(model, x)?;
    let cost = loss.cost(&output, labels, mask)?;
    Ok(cost + l2_penalty(model))
}

pub fn l2_penalty<T: Real>(model: &NetworkModel<T>) -> T {
    let half = real::<T>(0.5);
    let sum: T = model
        .weights
        .iter()
        .map(|w| w.iter().map(|&v| v * v).sum::<T>())
        .sum();
    model.adam.lambda * half * sum
}
