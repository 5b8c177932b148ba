//! The three forecasting architectures as explicit layer graphs.

mod build;
mod graph;
mod spec;

pub use build::{build, build_cnn1d, build_cnn_lstm, build_lstm_ed};
pub use graph::{GraphObjective, LayerSpec, LstmInput, ModelGraph, Trace};
pub use spec::{Architecture, ForwardMode, ModelSpec, FEATURES};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::rng::rng_from_seed;
    use crate::diffcore::Tensor;
    use crate::Error;
    use rand::Rng as _;

    fn history(batch: usize, t: usize, seed: u64) -> Tensor {
        let mut rng = rng_from_seed(seed);
        let data = (0..batch * t * FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::new(vec![batch, t, FEATURES], data).unwrap()
    }

    fn lstm_count(input: usize, units: usize) -> usize {
        4 * (input + units + 1) * units
    }

    #[test]
    fn default_shapes() {
        let x = history(3, 8, 1);
        for graph in [
            build_lstm_ed([64, 64, 64], 8, 12, 0.2, 0).unwrap(),
            build_cnn1d(8, 12, 0.2, 0).unwrap(),
            build_cnn_lstm(8, 12, 0.2, 0).unwrap(),
        ] {
            let y = graph.predict(&x, ForwardMode::Deterministic).unwrap();
            assert_eq!(y.shape(), &[3, 12, 4], "{}", graph.spec().architecture);
        }
    }

    #[test]
    fn single_step_horizon() {
        let g = build_lstm_ed([8, 8, 8], 8, 1, 0.2, 0).unwrap();
        assert_eq!(g.predict(&history(2, 8, 0), ForwardMode::Deterministic).unwrap().shape(), &[2, 1, 4]);
    }

    #[test]
    fn invalid_lengths_rejected() {
        assert!(matches!(build_cnn1d(0, 12, 0.2, 0), Err(Error::Parameter(_))));
        assert!(matches!(build_cnn_lstm(8, 0, 0.2, 0), Err(Error::Parameter(_))));
        assert!(matches!(build_lstm_ed([4, 4, 4], 8, 12, 1.0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        let g = build_lstm_ed([64, 32, 16], 8, 12, 0.2, 0).unwrap();
        let expected = lstm_count(4, 64) + lstm_count(64, 32) + lstm_count(32, 16) + (16 * 4 + 4);
        assert_eq!(g.parameter_count(), expected);

        let conv = |k: usize, i: usize, o: usize| k * i * o + o;
        let g = build_cnn1d(8, 12, 0.2, 0).unwrap();
        let expected = conv(5, 4, 128) + conv(5, 128, 64) + conv(5, 64, 64) + (8 * 64 * 48 + 48);
        assert_eq!(g.parameter_count(), expected);

        let g = build_cnn_lstm(8, 12, 0.2, 0).unwrap();
        let expected = conv(5, 4, 128) + conv(5, 128, 64) + lstm_count(8 * 64, 64) + (64 * 4 + 4);
        assert_eq!(g.parameter_count(), expected);
    }

    #[test]
    fn odd_history_truncates_pool_remainder() {
        let g = build(&ModelSpec::toy(Architecture::Cnn1d, 7, 3, 0.1)).unwrap();
        let y = g.predict(&history(2, 7, 4), ForwardMode::Deterministic).unwrap();
        assert_eq!(y.shape(), &[2, 3, 4]);
    }

    #[test]
    fn wrong_history_shape() {
        let g = build(&ModelSpec::toy(Architecture::LstmEd, 8, 12, 0.2)).unwrap();
        assert!(matches!(
            g.predict(&history(1, 7, 0), ForwardMode::Deterministic),
            Err(Error::Dimension { .. })
        ));
        let bad = Tensor::zeros(&[1, 8, 3]);
        assert!(g.predict(&bad, ForwardMode::Deterministic).is_err());
    }

    #[test]
    fn deterministic_is_pure_and_stochastic_is_seeded() {
        let x = history(4, 8, 2);
        for arch in Architecture::ALL {
            let g = build(&ModelSpec::toy(arch, 8, 12, 0.3)).unwrap();
            let d1 = g.predict(&x, ForwardMode::Deterministic).unwrap();
            let d2 = g.predict(&x, ForwardMode::Deterministic).unwrap();
            assert_eq!(d1, d2);

            let s = |seed| g.predict(&x, ForwardMode::Stochastic { p: 0.3, seed }).unwrap();
            assert_eq!(s(5), s(5));
            assert_ne!(s(5), s(6), "{arch}");

            let zero = g.predict(&x, ForwardMode::Stochastic { p: 0.0, seed: 9 }).unwrap();
            assert_eq!(zero, d1, "p = 0 must equal deterministic for {arch}");
        }
    }

    #[test]
    fn zero_head_predicts_zero() {
        let mut g = build_cnn1d(8, 12, 0.2, 0).unwrap();
        let n = g.parameters().len();
        for p in &mut g.parameters_mut()[n - 2..] {
            p.value.fill(0.0);
        }
        let y = g.predict(&history(2, 8, 3), ForwardMode::Deterministic).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_stacks_are_causal() {
        // Perturbing the last history step must not change conv activations at
        // earlier steps; check by truncating the graph before its head.
        for arch in [Architecture::Cnn1d, Architecture::CnnLstm] {
            let g = build(&ModelSpec::toy(arch, 8, 12, 0.2)).unwrap();
            let conv_layers = g
                .layers()
                .iter()
                .take_while(|l| !matches!(l, LayerSpec::MaxPool { .. } | LayerSpec::Flatten))
                .count();
            let x = history(1, 8, 7);
            let mut x2 = x.clone();
            for v in &mut x2.data_mut()[7 * FEATURES..] {
                *v += 3.0;
            }
            let run = |input: &Tensor| {
                let mut sub = g.clone();
                sub.layers.truncate(conv_layers);
                let mut h = input.clone();
                for layer in &sub.layers {
                    h = match layer {
                        LayerSpec::Conv1dCausal { params, .. } => crate::diffcore::conv1d_causal_forward(
                            &sub.params[params[0]].value,
                            &sub.params[params[1]].value,
                            &h,
                        )
                        .unwrap(),
                        LayerSpec::Activation { kind } => crate::diffcore::activation(&h, *kind),
                        _ => h,
                    };
                }
                h
            };
            let (a, b) = (run(&x), run(&x2));
            let ch = a.shape()[2];
            assert_eq!(a.data()[..7 * ch], b.data()[..7 * ch]);
        }
    }
}
