use trajmc::data::synthetic::{curvilinear_corpus, SyntheticConfig};
use trajmc::data::{batch_tensors, prepare, PrepareConfig, PreparedDataset};
use trajmc::models::{build, Architecture, ForwardMode, ModelGraph, ModelSpec};
use trajmc::training::{train, TrainConfig};
use trajmc::uncertainty::{mc_sample, mc_sample_batch, TrajectoryDistribution};

fn trained(arch: Architecture) -> (ModelGraph, PreparedDataset) {
    let raw = curvilinear_corpus(&SyntheticConfig { tracks: 30, seed: 4, ..Default::default() });
    let ds = prepare(&raw, &PrepareConfig::default()).unwrap();
    let mut g = build(&ModelSpec::toy(arch, 8, 12, 0.2)).unwrap();
    train(&mut g, &ds.normalized_train(), &TrainConfig { epochs: 3, ..Default::default() }).unwrap();
    (g, ds)
}

#[test]
fn zero_dropout_collapses_to_the_deterministic_path() {
    let (g, ds) = trained(Architecture::CnnLstm);
    let test = ds.normalized_test();
    let (x, _) = batch_tensors(&test[..3]).unwrap();
    let det = g.predict(&x, ForwardMode::Deterministic).unwrap();
    let det_m = ds.stats.invert_tensor(&det);
    for (b, d) in mc_sample_batch(&g, &ds.stats, &x, 5, 0.0, 1).unwrap().iter().enumerate() {
        for path in &d.samples {
            for (t, p) in path.iter().enumerate() {
                let o = (b * 12 + t) * 4;
                assert_eq!(*p, [det_m.data()[o], det_m.data()[o + 1]]);
            }
        }
        assert!(d.per_step.iter().all(|s| s.variance() == [0.0, 0.0]));
    }
}

#[test]
fn seeded_and_spread() {
    for arch in Architecture::ALL {
        let (g, ds) = trained(arch);
        let test = ds.normalized_test();
        let (x, _) = batch_tensors(&test[..1]).unwrap();
        let a = mc_sample(&g, &ds.stats, &x, 30, 0.2, 9).unwrap();
        let b = mc_sample(&g, &ds.stats, &x, 30, 0.2, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, mc_sample(&g, &ds.stats, &x, 30, 0.2, 10).unwrap());
        assert!(a.max_pairwise_distance() > 0.0, "{arch}");
        assert_eq!(a.n(), 30);
        assert_eq!(a.horizon(), 12);
    }
}

#[test]
fn sigma_stabilizes_with_more_passes() {
    let (g, ds) = trained(Architecture::LstmEd);
    let test = ds.normalized_test();
    let (x, _) = batch_tensors(&test[..1]).unwrap();
    let small: TrajectoryDistribution = mc_sample(&g, &ds.stats, &x, 200, 0.3, 5).unwrap();
    let large = mc_sample(&g, &ds.stats, &x, 2000, 0.3, 5).unwrap();
    for (s, l) in small.per_step.iter().zip(&large.per_step) {
        for k in 0..2 {
            assert!((s.sigma[k] - l.sigma[k]).abs() < 0.1 * l.sigma[k], "{} vs {}", s.sigma[k], l.sigma[k]);
        }
    }
}

#[test]
fn invalid_mc_arguments() {
    let (g, ds) = trained(Architecture::Cnn1d);
    let (x, _) = batch_tensors(&ds.normalized_test()[..1]).unwrap();
    assert!(mc_sample(&g, &ds.stats, &x, 0, 0.2, 1).is_err());
    assert!(mc_sample(&g, &ds.stats, &x, 3, 1.0, 1).is_err());
}
