//! Trainable parameters and the Adam optimizer.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A named weight tensor with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub gradient: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name: name.into(),
            gradient: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            value,
            step_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.gradient.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// One bias-corrected Adam update using the gradient currently stored in `param`.
pub fn adam_step(param: &mut Parameter, learning_rate: f64, cfg: &AdamConfig) -> Result<()> {
    if !learning_rate.is_finite() || learning_rate < 0.0 {
        return Err(Error::Parameter(format!(
            "learning rate must be finite and non-negative, got {learning_rate}"
        )));
    }
    param
        .gradient
        .check_finite(&format!("gradient of parameter `{}`", param.name))?;

    param.step_count += 1;
    let t = param.step_count as i32;
    let correction1 = 1.0 - cfg.beta1.powi(t);
    let correction2 = 1.0 - cfg.beta2.powi(t);

    let grads = param.gradient.data();
    let m = param.adam_m.data_mut();
    for (mi, &g) in m.iter_mut().zip(grads) {
        *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
    }
    let v = param.adam_v.data_mut();
    for (vi, &g) in v.iter_mut().zip(grads) {
        *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
    }
    let m = param.adam_m.data();
    let v = param.adam_v.data();
    for ((w, &mi), &vi) in param.value.data_mut().iter_mut().zip(m).zip(v) {
        let m_hat = mi / correction1;
        let v_hat = vi / correction2;
        *w -= learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}
