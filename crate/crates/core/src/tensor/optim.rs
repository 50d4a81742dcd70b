//! Trainable parameters and the Adam optimizer.

use std::cell::{Cell, RefCell};

use super::{Tensor, TensorError};
use crate::Scalar;

/// A named trainable tensor with its Adam moment estimates.
pub struct Parameter<S: Scalar> {
    tensor: Tensor<S>,
    name: String,
    first_moment: RefCell<Vec<S>>,
    second_moment: RefCell<Vec<S>>,
    step: Cell<u64>,
}

impl<S: Scalar> Parameter<S> {
    pub fn new(tensor: Tensor<S>, name: impl Into<String>) -> Self {
        assert!(
            tensor.requires_grad(),
            "parameters must be created with requires_grad"
        );
        let n = tensor.len();
        Parameter {
            tensor,
            name: name.into(),
            first_moment: RefCell::new(vec![S::zero(); n]),
            second_moment: RefCell::new(vec![S::zero(); n]),
            step: Cell::new(0),
        }
    }

    pub fn tensor(&self) -> &Tensor<S> {
        &self.tensor
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn step_count(&self) -> u64 {
        self.step.get()
    }

    pub fn len(&self) -> usize {
        self.tensor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensor.is_empty()
    }

    pub fn zero_grad(&self) {
        self.tensor.clear_grad();
    }

    /// Restores optimizer state, used when resuming from a checkpoint.
    pub fn set_optimizer_step(&self, step: u64) {
        self.step.set(step);
    }
}

/// Adam hyperparameters. Defaults: beta1 0.9, beta2 0.999, epsilon 1e-8,
/// the optimizer's standard constants.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter.
///
/// Gradients are left intact; call `zero_grad` explicitly before the next
/// backward pass.
pub fn adam_step<S: Scalar>(
    params: &[&Parameter<S>],
    cfg: &AdamConfig,
) -> Result<(), TensorError> {
    for p in params {
        if p.tensor.grad().is_none() {
            return Err(TensorError::MissingGradient {
                name: p.name.clone(),
            });
        }
    }
    let b1 = S::from_f64(cfg.beta1);
    let b2 = S::from_f64(cfg.beta2);
    let lr = S::from_f64(cfg.learning_rate);
    let eps = S::from_f64(cfg.epsilon);
    let one = S::one();
    for p in params {
        let t = p.step.get() + 1;
        p.step.set(t);
        let bc1 = one - S::from_f64(cfg.beta1.powi(t as i32));
        let bc2 = one - S::from_f64(cfg.beta2.powi(t as i32));
        let grad = p.tensor.grad().expect("checked above");
        let mut m = p.first_moment.borrow_mut();
        let mut v = p.second_moment.borrow_mut();
        p.tensor.update_data(|w| {
            for i in 0..w.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
    }
    Ok(())
}
