//! Seeded weight initializers.

use rand::Rng as _;

use super::rng::Rng;
use super::tensor::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, limit, rng)
}

/// Uniform in `±1/sqrt(units)`, used for recurrent matrices.
pub fn recurrent_uniform(shape: &[usize], units: usize, rng: &mut Rng) -> Tensor {
    uniform(shape, 1.0 / (units as f64).sqrt(), rng)
}

pub fn uniform(shape: &[usize], limit: f64, rng: &mut Rng) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::from_parts(shape.to_vec(), data)
}
