//! Inverted dropout: kept activations are scaled by `1 / keep_probability` when the
//! mask is applied, so the no-dropout path needs no rescaling.

use rand::Rng as _;

use super::rng::Rng;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    shape: Vec<usize>,
    keep: Vec<bool>,
    keep_probability: f64,
}

fn check_keep_probability(keep_probability: f64) -> Result<()> {
    if !(keep_probability > 0.0 && keep_probability <= 1.0) {
        return Err(Error::Parameter(format!(
            "keep probability must lie in (0, 1], got {keep_probability}"
        )));
    }
    Ok(())
}

impl DropoutMask {
    /// Draw each flag as Bernoulli(`keep_probability`).
    pub fn sample(shape: &[usize], keep_probability: f64, rng: &mut Rng) -> Result<Self> {
        check_keep_probability(keep_probability)?;
        let len: usize = shape.iter().product();
        let keep = if keep_probability == 1.0 {
            vec![true; len]
        } else {
            (0..len).map(|_| rng.random::<f64>() < keep_probability).collect()
        };
        Ok(DropoutMask {
            shape: shape.to_vec(),
            keep,
            keep_probability,
        })
    }

    pub fn from_flags(shape: &[usize], keep: Vec<bool>, keep_probability: f64) -> Result<Self> {
        check_keep_probability(keep_probability)?;
        if shape.iter().product::<usize>() != keep.len() {
            return Err(Error::dim(
                "dropout mask",
                format!("{} flags for {shape:?}", shape.iter().product::<usize>()),
                format!("{} flags", keep.len()),
            ));
        }
        Ok(DropoutMask {
            shape: shape.to_vec(),
            keep,
            keep_probability,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn keep_flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn keep_probability(&self) -> f64 {
        self.keep_probability
    }

    fn scale(&self, input: &Tensor) -> Result<Tensor> {
        input.expect_shape("dropout", &self.shape)?;
        let inv = 1.0 / self.keep_probability;
        let data = input
            .data()
            .iter()
            .zip(&self.keep)
            .map(|(&v, &k)| if k { v * inv } else { 0.0 })
            .collect();
        Ok(Tensor::from_parts(self.shape.clone(), data))
    }
}

pub fn dropout_apply(input: &Tensor, mask: &DropoutMask) -> Result<Tensor> {
    mask.scale(input)
}

/// The same mask and scale applied to the incoming gradient.
pub fn dropout_backward(grad_out: &Tensor, mask: &DropoutMask) -> Result<Tensor> {
    mask.scale(grad_out)
}
