use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

fn check_dense(op: &'static str, w: &Tensor, b: &Tensor, x: &Tensor) -> Result<(usize, usize, usize)> {
    w.expect_rank(op, 2)?;
    let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
    b.expect_shape(op, &[fan_out])?;
    let last = *x.shape().last().unwrap_or(&0);
    if last != fan_in {
        return Err(Error::dim(
            op,
            format!("input [.., {fan_in}] for weights {:?}", w.shape()),
            format!("{:?}", x.shape()),
        ));
    }
    Ok((x.len() / fan_in, fan_in, fan_out))
}

/// `input · W + b` for `input` of shape `[batch, in]`, `W` of shape `[in, out]`.
pub fn dense_forward(w: &Tensor, b: &Tensor, input: &Tensor) -> Result<Tensor> {
    input.expect_rank("dense", 2)?;
    let (rows, fan_in, fan_out) = check_dense("dense", w, b, input)?;
    Ok(Tensor::from_parts(
        vec![rows, fan_out],
        affine(rows, fan_in, fan_out, w, b, input.data()),
    ))
}

pub(crate) fn affine(rows: usize, fan_in: usize, fan_out: usize, w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * fan_out);
    for _ in 0..rows {
        out.extend_from_slice(b.data());
    }
    gemm(rows, fan_in, fan_out, 1.0, x, false, w.data(), false, 1.0, &mut out);
    out
}

/// Backward of an affine map over the flattened leading axes of `input`.
///
/// Accumulates into `grad_w` and `grad_b` and returns the gradient w.r.t. `input`.
pub(crate) fn affine_backward(
    w: &Tensor,
    input: &Tensor,
    grad_out: &[f64],
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Tensor {
    let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
    let rows = input.len() / fan_in;
    debug_assert_eq!(grad_out.len(), rows * fan_out);
    gemm(fan_in, rows, fan_out, 1.0, input.data(), true, grad_out, false, 1.0, grad_w.data_mut());
    let gb = grad_b.data_mut();
    for row in grad_out.chunks_exact(fan_out) {
        for (g, &d) in gb.iter_mut().zip(row) {
            *g += d;
        }
    }
    let mut grad_in = vec![0.0; rows * fan_in];
    gemm(rows, fan_out, fan_in, 1.0, grad_out, false, w.data(), true, 0.0, &mut grad_in);
    Tensor::from_parts(input.shape().to_vec(), grad_in)
}

pub fn dense_backward(
    w: &Tensor,
    input: &Tensor,
    grad_out: &Tensor,
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Result<Tensor> {
    let rows = input.shape()[0];
    grad_out.expect_shape("dense backward", &[rows, w.shape()[1]])?;
    Ok(affine_backward(w, input, grad_out.data(), grad_w, grad_b))
}

/// The same dense map applied independently at every step of `[batch, T, in]`.
pub fn time_distributed_dense(w: &Tensor, b: &Tensor, input: &Tensor) -> Result<Tensor> {
    input.expect_rank("time-distributed dense", 3)?;
    let (rows, fan_in, fan_out) = check_dense("time-distributed dense", w, b, input)?;
    let (batch, steps) = (input.shape()[0], input.shape()[1]);
    Ok(Tensor::from_parts(
        vec![batch, steps, fan_out],
        affine(rows, fan_in, fan_out, w, b, input.data()),
    ))
}

pub fn time_distributed_dense_backward(
    w: &Tensor,
    input: &Tensor,
    grad_out: &Tensor,
    grad_w: &mut Tensor,
    grad_b: &mut Tensor,
) -> Result<Tensor> {
    let s = input.shape();
    grad_out.expect_shape("time-distributed dense backward", &[s[0], s[1], w.shape()[1]])?;
    Ok(affine_backward(w, input, grad_out.data(), grad_w, grad_b))
}
