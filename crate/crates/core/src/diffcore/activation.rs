use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Relu,
    Linear,
    Sigmoid,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Linear => x,
            ActivationKind::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's own output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Linear => 1.0,
            ActivationKind::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn activation(input: &Tensor, kind: ActivationKind) -> Tensor {
    let data = input.data().iter().map(|&v| kind.apply(v)).collect();
    Tensor::from_parts(input.shape().to_vec(), data)
}

/// Gradient w.r.t. the activation input, given the forward output.
pub fn activation_backward(output: &Tensor, grad_out: &Tensor, kind: ActivationKind) -> Tensor {
    debug_assert_eq!(output.shape(), grad_out.shape());
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| g * kind.derivative_from_output(y))
        .collect();
    Tensor::from_parts(output.shape().to_vec(), data)
}
