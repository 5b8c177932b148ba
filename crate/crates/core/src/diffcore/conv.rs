//! Causal 1-D convolution over `[batch, T, channels]`, implemented as im2col + GEMM.
//!
//! `output[t] = bias + Σ_j input[t - j] · kernel[j]`, with `input[t' < 0] = 0`, so the
//! output at step `t` never sees steps after `t`.

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

fn dims(kernel: &Tensor, bias: &Tensor, input: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
    kernel.expect_rank("causal conv1d kernel", 3)?;
    input.expect_rank("causal conv1d", 3)?;
    let (width, in_ch, out_ch) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    bias.expect_shape("causal conv1d bias", &[out_ch])?;
    let (batch, steps) = (input.shape()[0], input.shape()[1]);
    if input.shape()[2] != in_ch {
        return Err(Error::dim(
            "causal conv1d",
            format!("{in_ch} input channels for kernel {:?}", kernel.shape()),
            format!("{:?}", input.shape()),
        ));
    }
    Ok((batch, steps, width, in_ch, out_ch))
}

/// Row `(b, t)` of the unfolded input holds `input[b, t - j, :]` for `j = 0..width`.
fn im2col(input: &Tensor, width: usize) -> Vec<f64> {
    let (batch, steps, ch) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let row_len = width * ch;
    let mut cols = vec![0.0; batch * steps * row_len];
    let x = input.data();
    for b in 0..batch {
        for t in 0..steps {
            let row = &mut cols[(b * steps + t) * row_len..(b * steps + t + 1) * row_len];
            for j in 0..width.min(t + 1) {
                let src = (b * steps + t - j) * ch;
                row[j * ch..(j + 1) * ch].copy_from_slice(&x[src..src + ch]);
            }
        }
    }
    cols
}

pub fn conv1d_causal_forward(kernel: &Tensor, bias: &Tensor, input: &Tensor) -> Result<Tensor> {
    let (batch, steps, width, in_ch, out_ch) = dims(kernel, bias, input)?;
    let rows = batch * steps;
    let cols = im2col(input, width);
    let mut out = Vec::with_capacity(rows * out_ch);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(rows, width * in_ch, out_ch, 1.0, &cols, false, kernel.data(), false, 1.0, &mut out);
    Ok(Tensor::from_parts(vec![batch, steps, out_ch], out))
}

/// Accumulates kernel/bias gradients and returns the gradient w.r.t. `input`.
pub fn conv1d_causal_backward(
    kernel: &Tensor,
    input: &Tensor,
    grad_out: &Tensor,
    grad_kernel: &mut Tensor,
    grad_bias: &mut Tensor,
) -> Result<Tensor> {
    let (width, in_ch, out_ch) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    let (batch, steps) = (input.shape()[0], input.shape()[1]);
    grad_out.expect_shape("causal conv1d backward", &[batch, steps, out_ch])?;
    let rows = batch * steps;
    let row_len = width * in_ch;
    let cols = im2col(input, width);
    let g = grad_out.data();
    gemm(row_len, rows, out_ch, 1.0, &cols, true, g, false, 1.0, grad_kernel.data_mut());
    let gb = grad_bias.data_mut();
    for row in g.chunks_exact(out_ch) {
        for (acc, &d) in gb.iter_mut().zip(row) {
            *acc += d;
        }
    }
    let mut dcols = vec![0.0; rows * row_len];
    gemm(rows, out_ch, row_len, 1.0, g, false, kernel.data(), true, 0.0, &mut dcols);
    let mut dx = vec![0.0; batch * steps * in_ch];
    for b in 0..batch {
        for t in 0..steps {
            let row = &dcols[(b * steps + t) * row_len..(b * steps + t + 1) * row_len];
            for j in 0..width.min(t + 1) {
                let dst = (b * steps + t - j) * in_ch;
                for (d, &v) in dx[dst..dst + in_ch].iter_mut().zip(&row[j * in_ch..(j + 1) * in_ch]) {
                    *d += v;
                }
            }
        }
    }
    Ok(Tensor::from_parts(input.shape().to_vec(), dx))
}
