//! Adam optimizer state and the per-step parameter update.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Gradients, LayerSpec, NetworkModel};
use crate::scalar::{real, Real};

/// First/second moment accumulators plus hyperparameters. Defaults follow
/// the multitask setup: beta1 0.5, beta2 0.999, lambda 0.01, eps 1e-8.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdamState<T: Real> {
    pub m_weights: Vec<Array2<T>>,
    pub v_weights: Vec<Array2<T>>,
    pub m_biases: Vec<Array1<T>>,
    pub v_biases: Vec<Array1<T>>,
    /// Step counter for bias correction.
    pub t: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    /// L2 penalty coefficient; applied to weights only.
    pub lambda: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    pub fn zeroed(spec: &LayerSpec) -> Self {
        let m_weights: Vec<Array2<T>> = (0..spec.layer_count())
            .map(|l| Array2::zeros((spec.sizes[l + 1], spec.sizes[l])))
            .collect();
        let m_biases: Vec<Array1<T>> = (0..spec.layer_count())
            .map(|l| Array1::zeros(spec.sizes[l + 1]))
            .collect();
        Self {
            v_weights: m_weights.clone(),
            m_weights,
            v_biases: m_biases.clone(),
            m_biases,
            t: 0,
            lr: real(0.1),
            beta1: real(0.5),
            beta2: real(0.999),
            lambda: real(0.01),
            eps: real(1e-8),
        }
    }

    /// Clears accumulators and the step counter, keeping hyperparameters.
    pub fn reset(&mut self) {
        for m in self.m_weights.iter_mut().chain(self.v_weights.iter_mut()) {
            m.fill(T::zero());
        }
        for m in self.m_biases.iter_mut().chain(self.v_biases.iter_mut()) {
            m.fill(T::zero());
        }
        self.t = 0;
    }
}

/// One Adam update: `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`,
/// bias-corrected, then `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step<T: Real>(model: &mut NetworkModel<T>, grads: &Gradients<T>) {
    let adam = &mut model.adam;
    adam.t += 1;
    let one = T::one();
    let b1 = adam.beta1;
    let b2 = adam.beta2;
    let c1 = one - b1.powi(adam.t as i32);
    let c2 = one - b2.powi(adam.t as i32);
    let lr = adam.lr;
    let eps = adam.eps;

    let update = |theta: &mut T, m: &mut T, v: &mut T, g: T| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for l in 0..model.weights.len() {
        let (w, m, v, g) = (
            &mut model.weights[l],
            &mut adam.m_weights[l],
            &mut adam.v_weights[l],
            &grads.weights[l],
        );
        for ((theta, m), (v, &g)) in w
            .iter_mut()
            .zip(m.iter_mut())
            .zip(v.iter_mut().zip(g.iter()))
        {
            update(theta, m, v, g);
        }
        let (b, m, v, g) = (
            &mut model.biases[l],
            &mut adam.m_biases[l],
            &mut adam.v_biases[l],
            &grads.biases[l],
        );
        for ((theta, m), (v, &g)) in b
            .iter_mut()
            .zip(m.iter_mut())
            .zip(v.iter_mut().zip(g.iter()))
        {
            update(theta, m, v, g);
        }
    }
}
