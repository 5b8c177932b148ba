//! Sequential layer graph over the diffcore kernels.

use serde::{Deserialize, Serialize};

use super::spec::{ForwardMode, ModelSpec, FEATURES};
use crate::diffcore::activation::{activation, activation_backward, ActivationKind};
use crate::diffcore::conv::{conv1d_causal_backward, conv1d_causal_forward};
use crate::diffcore::dense::{affine, affine_backward};
use crate::diffcore::dropout::{dropout_apply, dropout_backward, DropoutMask};
use crate::diffcore::gradcheck::Differentiable;
use crate::diffcore::loss::mse_loss;
use crate::diffcore::lstm::{input_projection, step_backward, step_from_projection, LstmStepCache, LstmWeights};
use crate::diffcore::param::Parameter;
use crate::diffcore::pool::{maxpool1d_backward, maxpool1d_forward, upsample1d_backward, upsample1d_forward, MaxPoolCache};
use crate::diffcore::rng::{rng_from_seed, Rng};
use crate::diffcore::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// What an LSTM layer consumes and emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmInput {
    /// `[batch, T, in]`; emits the full hidden sequence or only the last state.
    Sequence { return_sequences: bool },
    /// `[batch, in]` fed identically at each of `steps` steps; emits `[batch, steps, units]`.
    Repeated { steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerSpec {
    Lstm {
        input: usize,
        units: usize,
        mode: LstmInput,
        /// Indices of kernel, recurrent and bias parameters.
        params: [usize; 3],
    },
    Conv1dCausal {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        params: [usize; 2],
    },
    Activation {
        kind: ActivationKind,
    },
    Dropout,
    MaxPool {
        pool: usize,
    },
    Upsample {
        factor: usize,
    },
    Flatten,
    Dense {
        input: usize,
        output: usize,
        params: [usize; 2],
    },
    TimeDistributedDense {
        input: usize,
        output: usize,
        params: [usize; 2],
    },
    Reshape {
        steps: usize,
        features: usize,
    },
}

/// Per-sample activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Feature {
    Seq(usize, usize),
    Flat(usize),
}

impl Feature {
    fn dims(self, batch: usize) -> Vec<usize> {
        match self {
            Feature::Seq(t, c) => vec![batch, t, c],
            Feature::Flat(d) => vec![batch, d],
        }
    }
}

impl LayerSpec {
    fn name(&self) -> &'static str {
        match self {
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Conv1dCausal { .. } => "causal conv1d",
            LayerSpec::Activation { .. } => "activation",
            LayerSpec::Dropout => "dropout",
            LayerSpec::MaxPool { .. } => "max-pool",
            LayerSpec::Upsample { .. } => "upsample",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::TimeDistributedDense { .. } => "time-distributed dense",
            LayerSpec::Reshape { .. } => "reshape",
        }
    }

    /// Output shape for a given input shape, or a description of the mismatch.
    pub(crate) fn output_feature(&self, input: Feature) -> std::result::Result<Feature, String> {
        use Feature::*;
        match (self, input) {
            (LayerSpec::Lstm { input: n, units, mode, .. }, _) => match (mode, input) {
                (LstmInput::Sequence { return_sequences }, Seq(t, c)) if c == *n => {
                    Ok(if *return_sequences { Seq(t, *units) } else { Flat(*units) })
                }
                (LstmInput::Repeated { steps }, Flat(d)) if d == *n => Ok(Seq(*steps, *units)),
                _ => Err(format!("lstm with input width {n} ({mode:?})")),
            },
            (LayerSpec::Conv1dCausal { in_channels, out_channels, .. }, Seq(t, c)) if c == *in_channels => {
                Ok(Seq(t, *out_channels))
            }
            (LayerSpec::Activation { .. } | LayerSpec::Dropout, f) => Ok(f),
            (LayerSpec::MaxPool { pool }, Seq(t, c)) if *pool >= 1 && t / pool >= 1 => Ok(Seq(t / pool, c)),
            (LayerSpec::Upsample { factor }, Seq(t, c)) if *factor >= 1 => Ok(Seq(t * factor, c)),
            (LayerSpec::Flatten, Seq(t, c)) => Ok(Flat(t * c)),
            (LayerSpec::Dense { input: n, output, .. }, Flat(d)) if d == *n => Ok(Flat(*output)),
            (LayerSpec::TimeDistributedDense { input: n, output, .. }, Seq(t, c)) if c == *n => Ok(Seq(t, *output)),
            (LayerSpec::Reshape { steps, features }, Flat(d)) if d == steps * features => Ok(Seq(*steps, *features)),
            (layer, _) => Err(layer.name().to_string()),
        }
    }
}

/// Forward state of one layer, consumed by the backward pass.
enum Cache {
    Lstm { input: Tensor, steps: Vec<LstmStepCache> },
    Conv { input: Tensor },
    Activation { output: Tensor, kind: ActivationKind },
    Dropout(Option<DropoutMask>),
    MaxPool(MaxPoolCache),
    Upsample { factor: usize },
    Reshape { input_shape: Vec<usize> },
    Affine { input: Tensor },
}

/// Forward trace of the whole graph.
pub struct Trace {
    caches: Vec<Cache>,
}

/// Ordered layers plus their parameters for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    pub(crate) spec: ModelSpec,
    pub(crate) layers: Vec<LayerSpec>,
    pub(crate) params: Vec<Parameter>,
}

impl ModelGraph {
    /// Assemble a graph, checking that every layer's input matches its predecessor's output.
    pub fn from_parts(spec: ModelSpec, layers: Vec<LayerSpec>, params: Vec<Parameter>) -> Result<Self> {
        let graph = ModelGraph { spec, layers, params };
        graph.check_chain()?;
        Ok(graph)
    }

    fn check_chain(&self) -> Result<()> {
        let mut feat = Feature::Seq(self.spec.history_len, FEATURES);
        for (i, layer) in self.layers.iter().enumerate() {
            feat = layer.output_feature(feat).map_err(|what| {
                Error::dim("model graph", format!("input accepted by layer {i} ({what})"), format!("{feat:?}"))
            })?;
            for &p in layer_params(layer) {
                if p >= self.params.len() {
                    return Err(Error::Parameter(format!("layer {i} references missing parameter {p}")));
                }
            }
            self.check_param_shapes(i, layer)?;
        }
        let expected = Feature::Seq(self.spec.horizon, FEATURES);
        if feat != expected {
            return Err(Error::dim("model graph output", format!("{expected:?}"), format!("{feat:?}")));
        }
        Ok(())
    }

    fn check_param_shapes(&self, i: usize, layer: &LayerSpec) -> Result<()> {
        let expect = |idx: usize, shape: &[usize]| -> Result<()> {
            let got = self.params[idx].value.shape();
            if got != shape {
                return Err(Error::dim(
                    "model graph parameter",
                    format!("layer {i} `{}` of shape {shape:?}", self.params[idx].name),
                    format!("{got:?}"),
                ));
            }
            Ok(())
        };
        match layer {
            LayerSpec::Lstm { input, units, params, .. } => {
                expect(params[0], &[*input, 4 * units])?;
                expect(params[1], &[*units, 4 * units])?;
                expect(params[2], &[4 * units])
            }
            LayerSpec::Conv1dCausal { in_channels, out_channels, kernel_size, params } => {
                expect(params[0], &[*kernel_size, *in_channels, *out_channels])?;
                expect(params[1], &[*out_channels])
            }
            LayerSpec::Dense { input, output, params } | LayerSpec::TimeDistributedDense { input, output, params } => {
                expect(params[0], &[*input, *output])?;
                expect(params[1], &[*output])
            }
            _ => Ok(()),
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    pub fn history_len(&self) -> usize {
        self.spec.history_len
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    fn check_history(&self, history: &Tensor) -> Result<usize> {
        let s = history.shape();
        if s.len() != 3 || s[1] != self.spec.history_len || s[2] != FEATURES {
            return Err(Error::dim(
                "predict",
                format!("[batch, {}, {FEATURES}]", self.spec.history_len),
                format!("{s:?}"),
            ));
        }
        Ok(s[0])
    }

    /// Forecast `[batch, F, 4]` from `[batch, T, 4]`.
    pub fn predict(&self, history: &Tensor, mode: ForwardMode) -> Result<Tensor> {
        Ok(self.forward(history, mode, false)?.0)
    }

    /// Forward pass that also records what [`ModelGraph::backward`] needs.
    pub fn forward_trace(&self, history: &Tensor, mode: ForwardMode) -> Result<(Tensor, Trace)> {
        let (out, caches) = self.forward(history, mode, true)?;
        Ok((out, Trace { caches }))
    }

    fn forward(&self, history: &Tensor, mode: ForwardMode, record: bool) -> Result<(Tensor, Vec<Cache>)> {
        mode.validate()?;
        self.check_history(history)?;
        let mut rng: Option<(f64, Rng)> = match mode {
            ForwardMode::Deterministic => None,
            ForwardMode::Stochastic { p, seed } => Some((p, rng_from_seed(seed))),
        };
        let mut caches = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut x = history.clone();
        for layer in &self.layers {
            let (y, cache) = self.layer_forward(layer, x, &mut rng, record)?;
            if let Some(c) = cache {
                caches.push(c);
            }
            x = y;
        }
        Ok((x, caches))
    }

    fn p(&self, idx: usize) -> &Tensor {
        &self.params[idx].value
    }

    fn layer_forward(
        &self,
        layer: &LayerSpec,
        x: Tensor,
        rng: &mut Option<(f64, Rng)>,
        record: bool,
    ) -> Result<(Tensor, Option<Cache>)> {
        let keep = |c: Cache| if record { Some(c) } else { None };
        Ok(match layer {
            LayerSpec::Lstm { units, mode, params, .. } => {
                let w = LstmWeights {
                    kernel: self.p(params[0]),
                    recurrent: self.p(params[1]),
                    bias: self.p(params[2]),
                };
                let (y, steps) = lstm_layer_forward(&w, &x, *units, *mode, record);
                (y, keep(Cache::Lstm { input: x, steps }))
            }
            LayerSpec::Conv1dCausal { params, .. } => {
                let y = conv1d_causal_forward(self.p(params[0]), self.p(params[1]), &x)?;
                (y, keep(Cache::Conv { input: x }))
            }
            LayerSpec::Activation { kind } => {
                let y = activation(&x, *kind);
                let cache = if record {
                    Some(Cache::Activation { output: y.clone(), kind: *kind })
                } else {
                    None
                };
                (y, cache)
            }
            LayerSpec::Dropout => match rng {
                Some((p, r)) => {
                    let mask = DropoutMask::sample(x.shape(), 1.0 - *p, r)?;
                    let y = dropout_apply(&x, &mask)?;
                    (y, keep(Cache::Dropout(Some(mask))))
                }
                None => (x, keep(Cache::Dropout(None))),
            },
            LayerSpec::MaxPool { pool } => {
                let (y, c) = maxpool1d_forward(&x, *pool)?;
                (y, keep(Cache::MaxPool(c)))
            }
            LayerSpec::Upsample { factor } => (upsample1d_forward(&x, *factor)?, keep(Cache::Upsample { factor: *factor })),
            LayerSpec::Flatten => {
                let shape = x.shape().to_vec();
                let y = x.reshape(vec![shape[0], shape[1] * shape[2]])?;
                (y, keep(Cache::Reshape { input_shape: shape }))
            }
            LayerSpec::Reshape { steps, features } => {
                let shape = x.shape().to_vec();
                let y = x.reshape(vec![shape[0], *steps, *features])?;
                (y, keep(Cache::Reshape { input_shape: shape }))
            }
            LayerSpec::Dense { input, output, params } | LayerSpec::TimeDistributedDense { input, output, params } => {
                let rows = x.len() / input;
                let mut shape = x.shape().to_vec();
                *shape.last_mut().expect("rank >= 2") = *output;
                let y = affine(rows, *input, *output, self.p(params[0]), self.p(params[1]), x.data());
                (Tensor::from_parts(shape, y), keep(Cache::Affine { input: x }))
            }
        })
    }

    /// Accumulate parameter gradients for `grad_out = dL/d(output)`; returns `dL/d(history)`.
    pub fn backward(&mut self, trace: Trace, grad_out: &Tensor) -> Result<Tensor> {
        let batch = grad_out.shape()[0];
        grad_out.expect_shape("backward", &Feature::Seq(self.spec.horizon, FEATURES).dims(batch))?;
        if trace.caches.len() != self.layers.len() {
            return Err(Error::Parameter("trace does not belong to this graph".into()));
        }
        let mut g = grad_out.clone();
        let layers = std::mem::take(&mut self.layers);
        let result = (|| {
            for (layer, cache) in layers.iter().zip(trace.caches).rev() {
                g = self.layer_backward(layer, cache, g)?;
            }
            Ok(g)
        })();
        self.layers = layers;
        result
    }

    fn layer_backward(&mut self, layer: &LayerSpec, cache: Cache, g: Tensor) -> Result<Tensor> {
        match (layer, cache) {
            (LayerSpec::Lstm { units, mode, params, .. }, Cache::Lstm { input, steps }) => {
                Ok(self.lstm_layer_backward(*params, *units, *mode, &input, &steps, &g))
            }
            (LayerSpec::Conv1dCausal { params, .. }, Cache::Conv { input }) => {
                let [k, b] = *params;
                let (mut gk, mut gb) = self.take_grads(k, b);
                let dx = conv1d_causal_backward(self.p(k), &input, &g, &mut gk, &mut gb);
                self.put_grads(k, b, gk, gb);
                dx
            }
            (LayerSpec::Activation { .. }, Cache::Activation { output, kind }) => Ok(activation_backward(&output, &g, kind)),
            (LayerSpec::Dropout, Cache::Dropout(mask)) => match mask {
                Some(m) => dropout_backward(&g, &m),
                None => Ok(g),
            },
            (LayerSpec::MaxPool { .. }, Cache::MaxPool(c)) => maxpool1d_backward(&c, &g),
            (LayerSpec::Upsample { .. }, Cache::Upsample { factor }) => upsample1d_backward(&g, factor),
            (LayerSpec::Flatten | LayerSpec::Reshape { .. }, Cache::Reshape { input_shape }) => g.reshape(input_shape),
            (LayerSpec::Dense { params, .. } | LayerSpec::TimeDistributedDense { params, .. }, Cache::Affine { input }) => {
                let [w, b] = *params;
                let (mut gw, mut gb) = self.take_grads(w, b);
                let dx = affine_backward(self.p(w), &input, g.data(), &mut gw, &mut gb);
                self.put_grads(w, b, gw, gb);
                Ok(dx)
            }
            (layer, _) => Err(Error::Parameter(format!("trace does not match layer {}", layer.name()))),
        }
    }

    fn take_grads(&mut self, a: usize, b: usize) -> (Tensor, Tensor) {
        let ga = std::mem::replace(&mut self.params[a].gradient, Tensor::zeros(&[1]));
        let gb = std::mem::replace(&mut self.params[b].gradient, Tensor::zeros(&[1]));
        (ga, gb)
    }

    fn put_grads(&mut self, a: usize, b: usize, ga: Tensor, gb: Tensor) {
        self.params[a].gradient = ga;
        self.params[b].gradient = gb;
    }

    fn lstm_layer_backward(
        &mut self,
        params: [usize; 3],
        units: usize,
        mode: LstmInput,
        input: &Tensor,
        steps: &[LstmStepCache],
        g: &Tensor,
    ) -> Tensor {
        let batch = input.shape()[0];
        let width = 4 * units;
        let n_steps = steps.len();
        let fan_in = self.p(params[0]).shape()[0];
        let (sequence_out, repeated) = match mode {
            LstmInput::Sequence { return_sequences } => (return_sequences, false),
            LstmInput::Repeated { .. } => (true, true),
        };

        // dz for every step, laid out as rows (b, t) of the input sequence.
        let mut dz_all = vec![0.0; batch * n_steps * width];
        let mut dh_next = vec![0.0; batch * units];
        let mut dc_next = vec![0.0; batch * units];
        let mut grad_recurrent = std::mem::replace(&mut self.params[params[1]].gradient, Tensor::zeros(&[1]));
        let recurrent = self.p(params[1]);
        for t in (0..n_steps).rev() {
            let mut dh = dh_next.clone();
            if sequence_out {
                let gd = g.data();
                for b in 0..batch {
                    let src = (b * n_steps + t) * units;
                    for j in 0..units {
                        dh[b * units + j] += gd[src + j];
                    }
                }
            } else if t == n_steps - 1 {
                for (d, &v) in dh.iter_mut().zip(g.data()) {
                    *d += v;
                }
            }
            let (dz, dc_prev) = step_backward(&steps[t], &dh, &dc_next, batch, units);
            gemm(units, batch, width, 1.0, &steps[t].h_prev, true, &dz, false, 1.0, grad_recurrent.data_mut());
            gemm(batch, width, units, 1.0, &dz, false, recurrent.data(), true, 0.0, &mut dh_next);
            dc_next = dc_prev;
            for b in 0..batch {
                let dst = (b * n_steps + t) * width;
                dz_all[dst..dst + width].copy_from_slice(&dz[b * width..(b + 1) * width]);
            }
        }
        self.params[params[1]].gradient = grad_recurrent;

        let (dz_in, rows) = if repeated {
            let mut summed = vec![0.0; batch * width];
            for b in 0..batch {
                for t in 0..n_steps {
                    let src = (b * n_steps + t) * width;
                    for k in 0..width {
                        summed[b * width + k] += dz_all[src + k];
                    }
                }
            }
            (summed, batch)
        } else {
            (dz_all, batch * n_steps)
        };
        let gb = self.params[params[2]].gradient.data_mut();
        for row in dz_in.chunks_exact(width) {
            for (acc, &d) in gb.iter_mut().zip(row) {
                *acc += d;
            }
        }
        let mut grad_kernel = std::mem::replace(&mut self.params[params[0]].gradient, Tensor::zeros(&[1]));
        gemm(fan_in, rows, width, 1.0, input.data(), true, &dz_in, false, 1.0, grad_kernel.data_mut());
        self.params[params[0]].gradient = grad_kernel;
        let mut dx = vec![0.0; rows * fan_in];
        gemm(rows, width, fan_in, 1.0, &dz_in, false, self.p(params[0]).data(), true, 0.0, &mut dx);
        Tensor::from_parts(input.shape().to_vec(), dx)
    }

    /// Mean squared error of the forecast against `target`, and its gradients.
    pub fn loss_and_gradient(&mut self, history: &Tensor, target: &Tensor, mode: ForwardMode) -> Result<f64> {
        let (pred, trace) = self.forward_trace(history, mode)?;
        let (loss, grad) = mse_loss(&pred, target)?;
        self.zero_grad();
        self.backward(trace, &grad)?;
        Ok(loss)
    }
}

fn layer_params(layer: &LayerSpec) -> &[usize] {
    match layer {
        LayerSpec::Lstm { params, .. } => params,
        LayerSpec::Conv1dCausal { params, .. }
        | LayerSpec::Dense { params, .. }
        | LayerSpec::TimeDistributedDense { params, .. } => params,
        _ => &[],
    }
}

fn lstm_layer_forward(
    w: &LstmWeights<'_>,
    x: &Tensor,
    units: usize,
    mode: LstmInput,
    record: bool,
) -> (Tensor, Vec<LstmStepCache>) {
    let batch = x.shape()[0];
    let width = 4 * units;
    let (n_steps, zx_all) = match mode {
        LstmInput::Sequence { .. } => {
            let t = x.shape()[1];
            (t, input_projection(w, x.data(), batch * t))
        }
        LstmInput::Repeated { steps } => (steps, input_projection(w, x.data(), batch)),
    };
    let mut h = vec![0.0; batch * units];
    let mut c = vec![0.0; batch * units];
    let mut seq = Vec::with_capacity(batch * n_steps * units);
    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(n_steps);
    let mut caches = Vec::with_capacity(if record { n_steps } else { 0 });
    let mut zx = vec![0.0; batch * width];
    for t in 0..n_steps {
        let zx_t: &[f64] = match mode {
            LstmInput::Sequence { .. } => {
                for b in 0..batch {
                    let src = (b * n_steps + t) * width;
                    zx[b * width..(b + 1) * width].copy_from_slice(&zx_all[src..src + width]);
                }
                &zx
            }
            LstmInput::Repeated { .. } => &zx_all,
        };
        let (h_new, c_new, cache) = step_from_projection(zx_t, w.recurrent, &h, &c, batch, units);
        if record {
            caches.push(cache);
        }
        h = h_new;
        c = c_new;
        if !matches!(mode, LstmInput::Sequence { return_sequences: false }) {
            hs.push(h.clone());
        }
    }
    match mode {
        LstmInput::Sequence { return_sequences: false } => (Tensor::from_parts(vec![batch, units], h), caches),
        _ => {
            for b in 0..batch {
                for h_t in &hs {
                    seq.extend_from_slice(&h_t[b * units..(b + 1) * units]);
                }
            }
            (Tensor::from_parts(vec![batch, n_steps, units], seq), caches)
        }
    }
}

/// Binds a graph to a fixed forward mode so it can be gradient-checked.
///
/// A stochastic mode replays the same masks on every evaluation because the mask
/// stream is re-seeded per forward pass.
pub struct GraphObjective<'a> {
    pub graph: &'a mut ModelGraph,
    pub mode: ForwardMode,
}

impl Differentiable for GraphObjective<'_> {
    fn parameters(&self) -> &[Parameter] {
        &self.graph.params
    }

    fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.graph.params
    }

    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64> {
        let pred = self.graph.predict(input, self.mode)?;
        Ok(mse_loss(&pred, target)?.0)
    }

    fn loss_and_gradient(&mut self, input: &Tensor, target: &Tensor) -> Result<f64> {
        self.graph.loss_and_gradient(input, target, self.mode)
    }
}
