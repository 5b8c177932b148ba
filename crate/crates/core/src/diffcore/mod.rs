//! Layer kernels with hand-written backward passes, the MSE loss, Adam, and a
//! finite-difference gradient checker.
//!
//! Kernels are pure functions over explicit buffers. Everything is `f64`.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod lstm;
pub mod param;
pub mod pool;
pub mod rng;
pub mod tensor;

pub use activation::{activation, activation_backward, ActivationKind};
pub use conv::{conv1d_causal_backward, conv1d_causal_forward};
pub use dense::{
    dense_backward, dense_forward, time_distributed_dense, time_distributed_dense_backward,
};
pub use dropout::{dropout_apply, dropout_backward, DropoutMask};
pub use gradcheck::{gradient_check, Differentiable, GradCheckConfig, GradCheckReport};
pub use loss::mse_loss;
pub use lstm::{lstm_cell_backward, lstm_cell_forward, LstmGrads, LstmStepCache, LstmWeights};
pub use param::{adam_step, AdamConfig, Parameter};
pub use pool::{maxpool1d_backward, maxpool1d_forward, upsample1d_backward, upsample1d_forward};
pub use tensor::Tensor;
