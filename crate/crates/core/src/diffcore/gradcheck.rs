//! Central finite-difference verification of analytic parameter gradients.

use rand::seq::index::sample;

use super::param::Parameter;
use super::rng::rng_from_seed;
use super::tensor::Tensor;
use crate::error::Result;

/// A scalar objective over a parameter set, with an analytic gradient.
pub trait Differentiable {
    fn parameters(&self) -> &[Parameter];
    fn parameters_mut(&mut self) -> &mut [Parameter];
    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64>;
    /// Objective value; overwrites every parameter's `gradient`.
    fn loss_and_gradient(&mut self, input: &Tensor, target: &Tensor) -> Result<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Parameters larger than this are checked on a seeded random subset of elements.
    pub max_elements_per_parameter: usize,
    /// Denominator floor so that near-zero gradients compare on an absolute scale.
    pub magnitude_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            max_elements_per_parameter: 256,
            magnitude_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParameterCheck {
    pub name: String,
    pub elements_checked: usize,
    pub max_relative_error: f64,
    pub worst_element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub parameters: Vec<ParameterCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.parameters
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_relative_error() < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn gradient_check<M: Differentiable + ?Sized>(
    model: &mut M,
    input: &Tensor,
    target: &Tensor,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    model.loss_and_gradient(input, target)?;
    let analytic: Vec<Tensor> = model.parameters().iter().map(|p| p.gradient.clone()).collect();
    let mut rng = rng_from_seed(cfg.seed);
    let mut report = GradCheckReport {
        tolerance: cfg.tolerance,
        parameters: Vec::with_capacity(analytic.len()),
    };

    for (pi, grad) in analytic.iter().enumerate() {
        let len = grad.len();
        let mut indices: Vec<usize> = if len > cfg.max_elements_per_parameter {
            sample(&mut rng, len, cfg.max_elements_per_parameter).into_vec()
        } else {
            (0..len).collect()
        };
        indices.sort_unstable();

        let mut check = ParameterCheck {
            name: model.parameters()[pi].name.clone(),
            elements_checked: indices.len(),
            max_relative_error: 0.0,
            worst_element: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &idx in &indices {
            let original = model.parameters()[pi].value.data()[idx];
            model.parameters_mut()[pi].value.data_mut()[idx] = original + cfg.step;
            let plus = model.loss(input, target)?;
            model.parameters_mut()[pi].value.data_mut()[idx] = original - cfg.step;
            let minus = model.loss(input, target)?;
            model.parameters_mut()[pi].value.data_mut()[idx] = original;

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = grad.data()[idx];
            let err = relative_error(a, numeric, cfg.magnitude_floor);
            if err > check.max_relative_error {
                check.max_relative_error = err;
                check.worst_element = idx;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        report.parameters.push(check);
    }
    Ok(report)
}
