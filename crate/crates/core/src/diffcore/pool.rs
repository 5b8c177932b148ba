//! Non-overlapping max pooling and nearest-neighbour upsampling along time.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Flat input index of the maximum feeding each pooled output element.
#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Window max over `pool` consecutive steps; a trailing remainder shorter than
/// `pool` is dropped. Ties resolve to the earliest step.
pub fn maxpool1d_forward(input: &Tensor, pool: usize) -> Result<(Tensor, MaxPoolCache)> {
    if pool < 1 {
        return Err(Error::Parameter("max-pool size must be at least 1".into()));
    }
    input.expect_rank("max-pool", 3)?;
    let (batch, steps, ch) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let out_steps = steps / pool;
    if out_steps == 0 {
        return Err(Error::dim(
            "max-pool",
            format!("at least {pool} steps"),
            format!("{:?}", input.shape()),
        ));
    }
    let x = input.data();
    let mut out = Vec::with_capacity(batch * out_steps * ch);
    let mut argmax = Vec::with_capacity(batch * out_steps * ch);
    for b in 0..batch {
        for s in 0..out_steps {
            for c in 0..ch {
                let mut best_idx = (b * steps + s * pool) * ch + c;
                for w in 1..pool {
                    let idx = (b * steps + s * pool + w) * ch + c;
                    if x[idx] > x[best_idx] {
                        best_idx = idx;
                    }
                }
                out.push(x[best_idx]);
                argmax.push(best_idx);
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![batch, out_steps, ch], out),
        MaxPoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool1d_backward(cache: &MaxPoolCache, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::dim(
            "max-pool backward",
            format!("{} elements", cache.argmax.len()),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let mut dx = Tensor::zeros(&cache.input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
        d[idx] += g;
    }
    Ok(dx)
}

/// Repeat every step `factor` times.
pub fn upsample1d_forward(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor < 1 {
        return Err(Error::Parameter("upsample factor must be at least 1".into()));
    }
    input.expect_rank("upsample", 3)?;
    let (batch, steps, ch) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let x = input.data();
    let mut out = Vec::with_capacity(input.len() * factor);
    for b in 0..batch {
        for t in 0..steps {
            let src = &x[(b * steps + t) * ch..(b * steps + t + 1) * ch];
            for _ in 0..factor {
                out.extend_from_slice(src);
            }
        }
    }
    Ok(Tensor::from_parts(vec![batch, steps * factor, ch], out))
}

/// Sums the gradient over each repeated block.
pub fn upsample1d_backward(grad_out: &Tensor, factor: usize) -> Result<Tensor> {
    grad_out.expect_rank("upsample backward", 3)?;
    let (batch, up_steps, ch) = (grad_out.shape()[0], grad_out.shape()[1], grad_out.shape()[2]);
    if factor < 1 || up_steps % factor != 0 {
        return Err(Error::dim(
            "upsample backward",
            format!("steps divisible by {factor}"),
            format!("{:?}", grad_out.shape()),
        ));
    }
    let steps = up_steps / factor;
    let g = grad_out.data();
    let mut dx = vec![0.0; batch * steps * ch];
    for b in 0..batch {
        for t in 0..steps {
            let dst = (b * steps + t) * ch;
            for r in 0..factor {
                let src = (b * up_steps + t * factor + r) * ch;
                for c in 0..ch {
                    dx[dst + c] += g[src + c];
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![batch, steps, ch], dx))
}
