//! Constructors for the three forecasting architectures.

use super::graph::{LayerSpec, LstmInput, ModelGraph};
use super::spec::{Architecture, ModelSpec, FEATURES};
use crate::diffcore::activation::ActivationKind;
use crate::diffcore::init::{glorot_uniform, recurrent_uniform};
use crate::diffcore::param::Parameter;
use crate::diffcore::rng::{stream, Rng};
use crate::diffcore::tensor::Tensor;
use crate::error::Result;

struct Builder {
    layers: Vec<LayerSpec>,
    params: Vec<Parameter>,
    seed: u64,
    counters: [usize; 4],
}

impl Builder {
    fn new(seed: u64) -> Self {
        Builder { layers: Vec::new(), params: Vec::new(), seed, counters: [0; 4] }
    }

    fn rng(&self) -> Rng {
        stream(self.seed, &[self.layers.len() as u64])
    }

    fn name(&mut self, slot: usize, prefix: &str) -> String {
        let n = self.counters[slot];
        self.counters[slot] += 1;
        format!("{prefix}_{n}")
    }

    fn push_param(&mut self, name: String, value: Tensor) -> usize {
        self.params.push(Parameter::new(name, value));
        self.params.len() - 1
    }

    fn lstm(&mut self, input: usize, units: usize, mode: LstmInput) {
        let mut rng = self.rng();
        let base = self.name(0, "lstm");
        let kernel = glorot_uniform(&[input, 4 * units], input, 4 * units, &mut rng);
        let recurrent = recurrent_uniform(&[units, 4 * units], units, &mut rng);
        let k = self.push_param(format!("{base}.kernel"), kernel);
        let r = self.push_param(format!("{base}.recurrent"), recurrent);
        let b = self.push_param(format!("{base}.bias"), Tensor::zeros(&[4 * units]));
        self.layers.push(LayerSpec::Lstm { input, units, mode, params: [k, r, b] });
    }

    fn conv(&mut self, in_channels: usize, out_channels: usize, kernel_size: usize) {
        let mut rng = self.rng();
        let base = self.name(1, "conv1d");
        let kernel = glorot_uniform(
            &[kernel_size, in_channels, out_channels],
            kernel_size * in_channels,
            kernel_size * out_channels,
            &mut rng,
        );
        let k = self.push_param(format!("{base}.kernel"), kernel);
        let b = self.push_param(format!("{base}.bias"), Tensor::zeros(&[out_channels]));
        self.layers.push(LayerSpec::Conv1dCausal { in_channels, out_channels, kernel_size, params: [k, b] });
    }

    fn affine(&mut self, input: usize, output: usize, time_distributed: bool) {
        let mut rng = self.rng();
        let base = if time_distributed { self.name(3, "td_dense") } else { self.name(2, "dense") };
        let w = glorot_uniform(&[input, output], input, output, &mut rng);
        let wi = self.push_param(format!("{base}.kernel"), w);
        let bi = self.push_param(format!("{base}.bias"), Tensor::zeros(&[output]));
        self.layers.push(if time_distributed {
            LayerSpec::TimeDistributedDense { input, output, params: [wi, bi] }
        } else {
            LayerSpec::Dense { input, output, params: [wi, bi] }
        });
    }

    fn layer(&mut self, layer: LayerSpec) {
        self.layers.push(layer);
    }

    fn finish(self, spec: ModelSpec) -> Result<ModelGraph> {
        ModelGraph::from_parts(spec, self.layers, self.params)
    }
}

/// Build any architecture from its hyperparameters.
pub fn build(spec: &ModelSpec) -> Result<ModelGraph> {
    spec.validate()?;
    let mut b = Builder::new(spec.init_seed);
    let (t, f) = (spec.history_len, spec.horizon);
    match spec.architecture {
        Architecture::LstmEd => {
            let [e1, e2, dec] = [spec.lstm_units[0], spec.lstm_units[1], spec.lstm_units[2]];
            b.lstm(FEATURES, e1, LstmInput::Sequence { return_sequences: true });
            b.layer(LayerSpec::Dropout);
            b.lstm(e1, e2, LstmInput::Sequence { return_sequences: false });
            b.layer(LayerSpec::Dropout);
            // The final encoder state is repeated F times as the decoder input.
            b.lstm(e2, dec, LstmInput::Repeated { steps: f });
            b.layer(LayerSpec::Dropout);
            b.affine(dec, FEATURES, true);
        }
        Architecture::Cnn1d => {
            let k = spec.kernel_size;
            let [c1, c2, c3] = [spec.conv_filters[0], spec.conv_filters[1], spec.conv_filters[2]];
            let relu = || LayerSpec::Activation { kind: ActivationKind::Relu };
            b.conv(FEATURES, c1, k);
            b.layer(relu());
            b.layer(LayerSpec::Dropout);
            b.conv(c1, c2, k);
            b.layer(relu());
            b.layer(LayerSpec::Dropout);
            b.conv(c2, c3, k);
            b.layer(relu());
            b.layer(LayerSpec::MaxPool { pool: spec.pool });
            b.layer(LayerSpec::Upsample { factor: spec.pool });
            b.layer(LayerSpec::Flatten);
            let pooled_len = (t / spec.pool) * spec.pool;
            // Multi-step head: one output block of 4 features per future step.
            b.affine(pooled_len * c3, f * FEATURES, false);
            b.layer(LayerSpec::Reshape { steps: f, features: FEATURES });
        }
        Architecture::CnnLstm => {
            let k = spec.kernel_size;
            let [c1, c2] = [spec.conv_filters[0], spec.conv_filters[1]];
            let dec = spec.lstm_units[0];
            let relu = || LayerSpec::Activation { kind: ActivationKind::Relu };
            b.conv(FEATURES, c1, k);
            b.layer(relu());
            b.layer(LayerSpec::Dropout);
            b.conv(c1, c2, k);
            b.layer(relu());
            b.layer(LayerSpec::Dropout);
            b.layer(LayerSpec::Flatten);
            b.lstm(t * c2, dec, LstmInput::Repeated { steps: f });
            b.affine(dec, FEATURES, true);
        }
    }
    b.finish(spec.clone())
}

/// LSTM encoder-decoder: two stacked encoder LSTMs and one decoder LSTM.
pub fn build_lstm_ed(units: [usize; 3], history_len: usize, horizon: usize, dropout: f64, seed: u64) -> Result<ModelGraph> {
    let spec = ModelSpec {
        lstm_units: units.to_vec(),
        ..ModelSpec::standard(Architecture::LstmEd, history_len, horizon, dropout)
    };
    build(&spec.with_seed(seed))
}

/// Three causal convolutions (128, 64, 64 filters, width 5), max-pool, upsample, dense head.
pub fn build_cnn1d(history_len: usize, horizon: usize, dropout: f64, seed: u64) -> Result<ModelGraph> {
    build(&ModelSpec::standard(Architecture::Cnn1d, history_len, horizon, dropout).with_seed(seed))
}

/// Two causal convolutions (128, 64 filters) feeding an LSTM decoder.
pub fn build_cnn_lstm(history_len: usize, horizon: usize, dropout: f64, seed: u64) -> Result<ModelGraph> {
    build(&ModelSpec::standard(Architecture::CnnLstm, history_len, horizon, dropout).with_seed(seed))
}
