//! LSTM cell with sigmoid input/forget/output gates and a tanh candidate.
//!
//! Gate pre-activations are laid out as `[i | f | g | o]`, each `units` wide:
//! `kernel` is `[in, 4·units]`, `recurrent` is `[units, 4·units]`, `bias` is `[4·units]`.

use super::activation::sigmoid;
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub kernel: &'a Tensor,
    pub recurrent: &'a Tensor,
    pub bias: &'a Tensor,
}

impl LstmWeights<'_> {
    pub fn units(&self) -> usize {
        self.recurrent.shape()[0]
    }

    pub fn input_size(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.recurrent.expect_rank("lstm recurrent", 2)?;
        let units = self.units();
        self.recurrent.expect_shape("lstm recurrent", &[units, 4 * units])?;
        self.kernel.expect_rank("lstm kernel", 2)?;
        self.kernel
            .expect_shape("lstm kernel", &[self.input_size(), 4 * units])?;
        self.bias.expect_shape("lstm bias", &[4 * units])
    }
}

/// Gradient accumulators matching [`LstmWeights`].
pub struct LstmGrads<'a> {
    pub kernel: &'a mut Tensor,
    pub recurrent: &'a mut Tensor,
    pub bias: &'a mut Tensor,
}

/// Forward state kept for the backward pass of one step.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-nonlinearity gates, `[batch, 4·units]`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// One recurrence step given the input projection `x·W + b` (`zx`, `[batch, 4·units]`).
pub(crate) fn step_from_projection(
    zx: &[f64],
    recurrent: &Tensor,
    h_prev: &[f64],
    c_prev: &[f64],
    batch: usize,
    units: usize,
) -> (Vec<f64>, Vec<f64>, LstmStepCache) {
    let width = 4 * units;
    let mut z = zx.to_vec();
    gemm(batch, units, width, 1.0, h_prev, false, recurrent.data(), false, 1.0, &mut z);
    let mut h = vec![0.0; batch * units];
    let mut c = vec![0.0; batch * units];
    let mut tanh_c = vec![0.0; batch * units];
    for b in 0..batch {
        let zr = &mut z[b * width..(b + 1) * width];
        for j in 0..units {
            let i = sigmoid(zr[j]);
            let f = sigmoid(zr[units + j]);
            let g = zr[2 * units + j].tanh();
            let o = sigmoid(zr[3 * units + j]);
            zr[j] = i;
            zr[units + j] = f;
            zr[2 * units + j] = g;
            zr[3 * units + j] = o;
            let k = b * units + j;
            c[k] = f * c_prev[k] + i * g;
            tanh_c[k] = c[k].tanh();
            h[k] = o * tanh_c[k];
        }
    }
    let cache = LstmStepCache {
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: z,
        tanh_c,
    };
    (h, c, cache)
}

/// Gradient of the gate pre-activations for one step, plus `dL/dc_prev`.
///
/// `dh` and `dc` are the total gradients arriving at `h_t` and `c_t`.
pub(crate) fn step_backward(
    cache: &LstmStepCache,
    dh: &[f64],
    dc: &[f64],
    batch: usize,
    units: usize,
) -> (Vec<f64>, Vec<f64>) {
    let width = 4 * units;
    let mut dz = vec![0.0; batch * width];
    let mut dc_prev = vec![0.0; batch * units];
    for b in 0..batch {
        let gates = &cache.gates[b * width..(b + 1) * width];
        let dzr = &mut dz[b * width..(b + 1) * width];
        for j in 0..units {
            let k = b * units + j;
            let (i, f, g, o) = (gates[j], gates[units + j], gates[2 * units + j], gates[3 * units + j]);
            let tc = cache.tanh_c[k];
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dzr[j] = dct * g * i * (1.0 - i);
            dzr[units + j] = dct * cache.c_prev[k] * f * (1.0 - f);
            dzr[2 * units + j] = dct * i * (1.0 - g * g);
            dzr[3 * units + j] = dh[k] * tc * o * (1.0 - o);
            dc_prev[k] = dct * f;
        }
    }
    (dz, dc_prev)
}

pub(crate) fn input_projection(w: &LstmWeights<'_>, x: &[f64], rows: usize) -> Vec<f64> {
    let width = 4 * w.units();
    let mut zx = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        zx.extend_from_slice(w.bias.data());
    }
    gemm(rows, w.input_size(), width, 1.0, x, false, w.kernel.data(), false, 1.0, &mut zx);
    zx
}

/// `(h_t, c_t)` for input `x_t` `[batch, in]` and previous state `[batch, units]`.
pub fn lstm_cell_forward(
    w: LstmWeights<'_>,
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
) -> Result<(Tensor, Tensor, LstmStepCache)> {
    w.validate()?;
    x_t.expect_rank("lstm cell", 2)?;
    let (batch, units) = (x_t.shape()[0], w.units());
    if x_t.shape()[1] != w.input_size() {
        return Err(Error::dim(
            "lstm cell",
            format!("input [{batch}, {}]", w.input_size()),
            format!("{:?}", x_t.shape()),
        ));
    }
    h_prev.expect_shape("lstm cell h_prev", &[batch, units])?;
    c_prev.expect_shape("lstm cell c_prev", &[batch, units])?;
    let zx = input_projection(&w, x_t.data(), batch);
    let (h, c, cache) = step_from_projection(&zx, w.recurrent, h_prev.data(), c_prev.data(), batch, units);
    Ok((
        Tensor::from_parts(vec![batch, units], h),
        Tensor::from_parts(vec![batch, units], c),
        cache,
    ))
}

/// Backward of [`lstm_cell_forward`]: accumulates weight gradients and returns
/// `(dx_t, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    w: LstmWeights<'_>,
    x_t: &Tensor,
    cache: &LstmStepCache,
    dh: &Tensor,
    dc: &Tensor,
    grads: LstmGrads<'_>,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, units) = (x_t.shape()[0], w.units());
    dh.expect_shape("lstm cell backward dh", &[batch, units])?;
    dc.expect_shape("lstm cell backward dc", &[batch, units])?;
    let width = 4 * units;
    let fan_in = w.input_size();
    let (dz, dc_prev) = step_backward(cache, dh.data(), dc.data(), batch, units);
    accumulate_weight_grads(&dz, x_t.data(), &cache.h_prev, batch, fan_in, units, grads);
    let mut dx = vec![0.0; batch * fan_in];
    gemm(batch, width, fan_in, 1.0, &dz, false, w.kernel.data(), true, 0.0, &mut dx);
    let mut dh_prev = vec![0.0; batch * units];
    gemm(batch, width, units, 1.0, &dz, false, w.recurrent.data(), true, 0.0, &mut dh_prev);
    Ok((
        Tensor::from_parts(vec![batch, fan_in], dx),
        Tensor::from_parts(vec![batch, units], dh_prev),
        Tensor::from_parts(vec![batch, units], dc_prev),
    ))
}

pub(crate) fn accumulate_weight_grads(
    dz: &[f64],
    x: &[f64],
    h_prev: &[f64],
    rows: usize,
    fan_in: usize,
    units: usize,
    grads: LstmGrads<'_>,
) {
    let width = 4 * units;
    gemm(fan_in, rows, width, 1.0, x, true, dz, false, 1.0, grads.kernel.data_mut());
    gemm(units, rows, width, 1.0, h_prev, true, dz, false, 1.0, grads.recurrent.data_mut());
    let gb = grads.bias.data_mut();
    for row in dz.chunks_exact(width) {
        for (g, &d) in gb.iter_mut().zip(row) {
            *g += d;
        }
    }
}
