//! End-to-end acceptance run. One line per criterion goes straight to stdout so it
//! shows even when the harness captures output; the test fails if any line fails.
//!
//! Real-data checks read obsmat paths from `TRAJMC_ETH` (the ETH scene) and
//! `TRAJMC_ETH_HOTEL` (the HOTEL scene).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use trajmc::data::synthetic::{constant_velocity_corpus, curvilinear_corpus, SyntheticConfig};
use trajmc::data::{
    parse_annotations, prepare, sliding_window_augment, AnnotationFormat, PrepareConfig, PreparedDataset, RawTrack,
    TrackPoint,
};
use trajmc::diffcore::rng::rng_from_seed;
use trajmc::diffcore::{gradient_check, GradCheckConfig, Tensor};
use trajmc::experiments::{
    cmd_evaluate, cmd_import, cmd_train, evaluate_model, EvalMode, Evaluation, ExperimentConfig, ImportSource,
    SyntheticKind, Widths,
};
use trajmc::metrics::{ade, confidence_score, fde, score};
use trajmc::models::{build, Architecture, ForwardMode, GraphObjective, ModelGraph, ModelSpec, FEATURES};
use trajmc::training::{train, TrainConfig};
use trajmc::uncertainty::{distribution_stats, TrajectoryDistribution};

type Check = Result<String, String>;

fn emit(id: &str, title: &str, started: Instant, outcome: &Check) {
    let secs = started.elapsed().as_secs_f64();
    let line = match outcome {
        Ok(detail) => format!("[PASS] {id} {title} ({secs:.1}s): {detail}\n"),
        Err(detail) => format!("[FAIL] {id} {title} ({secs:.1}s): {detail}\n"),
    };
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn env_path(var: &str) -> Result<PathBuf, String> {
    match std::env::var_os(var) {
        Some(p) if Path::new(&p).is_file() => Ok(PathBuf::from(p)),
        Some(p) => Err(format!("{var}={} is not a readable file", Path::new(&p).display())),
        None => Err(format!("dataset unavailable: set {var} to the obsmat annotation file")),
    }
}

fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = rng_from_seed(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

fn gradient_fidelity() -> Check {
    let started = Instant::now();
    let mut worst = Vec::new();
    for arch in Architecture::ALL {
        let mut graph = build(&ModelSpec::toy(arch, 8, 12, 0.2).with_seed(3)).map_err(|e| e.to_string())?;
        let x = random_tensor(&[3, 8, FEATURES], 1);
        let y = random_tensor(&[3, 12, FEATURES], 2);
        let mut max = 0.0f64;
        for mode in [ForwardMode::Deterministic, ForwardMode::Stochastic { p: 0.2, seed: 4 }] {
            let mut objective = GraphObjective { graph: &mut graph, mode };
            let report = gradient_check(&mut objective, &x, &y, &GradCheckConfig::default()).map_err(|e| e.to_string())?;
            max = max.max(report.max_relative_error());
        }
        worst.push((arch, max));
    }
    let secs = started.elapsed().as_secs_f64();
    let detail = worst.iter().map(|(a, e)| format!("{a} {e:.2e}")).collect::<Vec<_>>().join(", ");
    ensure(worst.iter().all(|(_, e)| *e < 1e-4) && secs < 60.0, format!("max rel err {detail}; limit 1e-4 in < 60 s"))
}

fn random_distribution(seed: u64, n: usize, f: usize, scale: f64) -> TrajectoryDistribution {
    let mut rng = rng_from_seed(seed);
    let samples = (0..n)
        .map(|_| (0..f).map(|_| [rng.random_range(-scale..scale) + 3.0, rng.random_range(-scale..scale) - 7.0]).collect())
        .collect();
    TrajectoryDistribution::new(samples, 0.2).unwrap()
}

fn step_statistics() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let n = 2 + (seed as usize % 60);
        let d = random_distribution(seed, n, 1 + seed as usize % 20, 0.01 + seed as f64 * 0.1);
        let stats = distribution_stats(&d).map_err(|e| e.to_string())?;
        for (k, s) in stats.iter().enumerate() {
            for axis in 0..2 {
                let values: Vec<f64> = d.samples.iter().map(|path| path[k][axis]).collect();
                let mut sum = 0.0;
                for v in &values {
                    sum += v;
                }
                let mean = sum / n as f64;
                let mut sq = 0.0;
                for v in &values {
                    sq += (v - mean) * (v - mean);
                }
                let var = sq / n as f64;
                worst = worst.max((s.mean[axis] - mean).abs()).max((s.variance[axis] - var).abs());
            }
        }
    }
    ensure(worst <= 1e-12, format!("max |stats - two-pass oracle| = {worst:.2e} over 200 fixtures"))
}

fn line_path(f: usize, offset: f64) -> Vec<[f64; 2]> {
    (0..f).map(|k| [k as f64, offset]).collect()
}

fn metric_fixtures() -> Check {
    let mut worst = 0.0f64;
    let mut note = |got: f64, want: f64| worst = worst.max((got - want).abs());

    note(ade(&line_path(12, 1.0), &line_path(12, 0.0)).unwrap(), 1.0);
    note(fde(&[[1.0, 1.0], [0.0, 0.0]], &[[9.0, 9.0], [3.0, 4.0]]).unwrap(), 5.0);
    note(ade(&[[0.0, 0.0], [0.0, 0.0]], &[[3.0, 4.0], [6.0, 8.0]]).unwrap(), 7.5);

    let two = TrajectoryDistribution::new(vec![vec![[1.0, 1.0]; 12], vec![[-1.0, -1.0]; 12]], 0.2).unwrap();
    let (cx, cy) = confidence_score(&two, &[[0.0, 0.0]; 12]).unwrap();
    note(cx, 100.0);
    note(cy, 100.0);
    let mut truth = vec![[0.0, 0.0]; 12];
    truth[..3].copy_from_slice(&[[2.0, 0.0], [-2.5, 0.0], [0.0, 1.99]]);
    let (cx, cy) = confidence_score(&two, &truth).unwrap();
    note(cx, 1000.0 / 12.0);
    note(cy, 100.0);

    let mut rng = rng_from_seed(9);
    for trial in 0..300u64 {
        let d = random_distribution(trial, 2 + trial as usize % 40, 1 + trial as usize % 16, 0.5 + trial as f64 * 0.02);
        let truth: Vec<[f64; 2]> =
            (0..d.horizon()).map(|_| [rng.random_range(-2.0..8.0), rng.random_range(-12.0..-2.0)]).collect();
        let m = score(&d, &truth).unwrap();
        let mean = d.mean_path();
        let errs: Vec<f64> =
            mean.iter().zip(&truth).map(|(p, t)| ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt()).collect();
        note(m.ade, errs.iter().sum::<f64>() / errs.len() as f64);
        note(m.fde, *errs.last().unwrap());
        let stats = distribution_stats(&d).unwrap();
        let mut inside = [0usize; 2];
        for (s, t) in stats.iter().zip(&truth) {
            for axis in 0..2 {
                if (t[axis] - s.mean[axis]).abs() < 2.0 * s.variance[axis].sqrt() {
                    inside[axis] += 1;
                }
            }
        }
        let (cx, cy) = m.cs.ok_or("stochastic row without CS")?;
        note(cx, 100.0 * inside[0] as f64 / truth.len() as f64);
        note(cy, 100.0 * inside[1] as f64 / truth.len() as f64);
    }
    ensure(worst <= 1e-12, format!("max |metric - oracle| = {worst:.2e} on hand fixtures and 300 brute-force cases"))
}

fn calibration() -> Check {
    let trials = 2000;
    let mut rng = rng_from_seed(77);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut acc = [0.0; 2];
    for trial in 0..trials {
        let d = random_distribution(1000 + trial, 30, 12, 0.5 + (trial % 7) as f64);
        let truth: Vec<[f64; 2]> = d
            .per_step
            .iter()
            .map(|g| [g.mean[0] + g.sigma[0] * unit.sample(&mut rng), g.mean[1] + g.sigma[1] * unit.sample(&mut rng)])
            .collect();
        let (x, y) = confidence_score(&d, &truth).map_err(|e| e.to_string())?;
        acc[0] += x;
        acc[1] += y;
    }
    let cs = [acc[0] / trials as f64, acc[1] / trials as f64];
    ensure(
        cs.iter().all(|c| (c - 95.4).abs() <= 3.0),
        format!("mean CS x {:.2}%, y {:.2}% over {trials} trials; target 95.4 ± 3", cs[0], cs[1]),
    )
}

fn synthetic_convergence() -> Check {
    let started = Instant::now();
    let tracks = constant_velocity_corpus(&SyntheticConfig { tracks: 600, seed: 21, ..Default::default() });
    let ds = prepare(&tracks, &PrepareConfig::default()).map_err(|e| e.to_string())?;
    let train_set = ds.normalized_train();
    let cfg = TrainConfig { epochs: 100, seed: 1, ..Default::default() };
    let mut rows = Vec::new();
    let mut ok = true;
    for arch in Architecture::ALL {
        let mut graph = build(&ModelSpec::standard(arch, 8, 12, 0.0)).map_err(|e| e.to_string())?;
        let log = train(&mut graph, &train_set, &cfg).map_err(|e| e.to_string())?;
        let eval = evaluate_model(&graph, &ds.stats, &ds.test, EvalMode::Deterministic, 0, 0.4).map_err(|e| e.to_string())?;
        ok &= eval.report.ade < 0.1 && log.len() <= 100;
        rows.push(format!("{arch} ADE {:.4} m after {} epochs", eval.report.ade, log.len()));
    }
    let secs = started.elapsed().as_secs_f64();
    ok &= secs < 600.0;
    ensure(ok, format!("{}; {} test windows; limit 0.1 m in < 600 s", rows.join(", "), ds.test.len()))
}

struct EthRun {
    lstm_det: Evaluation,
    cnn_lstm_det: Evaluation,
    cnn_lstm_mc: Evaluation,
}

fn eth_run() -> Result<EthRun, String> {
    let path = env_path("TRAJMC_ETH")?;
    let tracks = parse_annotations(&path, AnnotationFormat::Obsmat).map_err(|e| e.to_string())?;
    let ds = prepare(&tracks, &PrepareConfig::default()).map_err(|e| e.to_string())?;
    let train_set = ds.normalized_train();
    let cfg = TrainConfig { epochs: 100, seed: 0, ..Default::default() };
    let fit = |arch| -> Result<ModelGraph, String> {
        let mut graph = build(&ModelSpec::standard(arch, 8, 12, 0.2)).map_err(|e| e.to_string())?;
        train(&mut graph, &train_set, &cfg).map_err(|e| e.to_string())?;
        Ok(graph)
    };
    let lstm = fit(Architecture::LstmEd)?;
    let cnn_lstm = fit(Architecture::CnnLstm)?;
    let eval = |g: &ModelGraph, mode| evaluate_model(g, &ds.stats, &ds.test, mode, 0, 0.4).map_err(|e| e.to_string());
    Ok(EthRun {
        lstm_det: eval(&lstm, EvalMode::Deterministic)?,
        cnn_lstm_det: eval(&cnn_lstm, EvalMode::Deterministic)?,
        cnn_lstm_mc: eval(&cnn_lstm, EvalMode::MonteCarlo { passes: 30, p: 0.2 })?,
    })
}

fn eth_table(run: &Result<EthRun, String>) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    let near = |e: &Evaluation, a: f64, f: f64| (e.report.ade - a).abs() <= 0.15 && (e.report.fde - f).abs() <= 0.15;
    ensure(
        near(&run.lstm_det, 0.54, 0.94) && near(&run.cnn_lstm_mc, 0.48, 0.82),
        format!(
            "LSTM {:.3}/{:.3} (ref 0.54/0.94), CNN-LSTM+MC {:.3}/{:.3} (ref 0.48/0.82), tolerance ±0.15",
            run.lstm_det.report.ade, run.lstm_det.report.fde, run.cnn_lstm_mc.report.ade, run.cnn_lstm_mc.report.fde
        ),
    )
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn mean_sigma_x(e: &Evaluation) -> f64 {
    let all: Vec<f64> = e.distributions.iter().flat_map(|d| d.per_step.iter().map(|g| g.sigma[0])).collect();
    all.iter().sum::<f64>() / all.len() as f64
}

/// Per-horizon models on the curvilinear corpus, shared by the ordering checks.
struct HorizonRun {
    horizons: Vec<usize>,
    /// `[arch][horizon]` deterministic and MC (p = 0.2) evaluations.
    det: Vec<Vec<Evaluation>>,
    mc: Vec<Vec<Evaluation>>,
    /// Mean σ_x at F = 12 for p = 0.2 and p = 0.4.
    sigma: Vec<(f64, f64)>,
}

fn horizon_run(dir: &Path) -> Result<HorizonRun, String> {
    let horizons = vec![8, 12, 16, 20];
    let corpus = SyntheticConfig { tracks: 200, min_len: 30, max_len: 60, seed: 5, ..Default::default() };
    let tracks = curvilinear_corpus(&corpus);
    let ds = prepare(&tracks, &PrepareConfig { horizon: 20, seed: 5, ..Default::default() }).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig { horizons: horizons.clone(), seed: 5, out_dir: dir.to_path_buf(), ..Default::default() };
    cfg.train.epochs = 25;
    let mut run = HorizonRun { horizons: horizons.clone(), det: Vec::new(), mc: Vec::new(), sigma: Vec::new() };
    for arch in Architecture::ALL {
        let outcomes = cmd_train(&ds, arch, &cfg).map_err(|e| e.to_string())?;
        let (mut det, mut mc) = (Vec::new(), Vec::new());
        for (o, &f) in outcomes.iter().zip(&horizons) {
            let test = ds.with_horizon(f).map_err(|e| e.to_string())?.test;
            let eval = |mode| evaluate_model(&o.graph, &o.stats, &test, mode, 5, 0.4).map_err(|e| e.to_string());
            det.push(eval(EvalMode::Deterministic)?);
            mc.push(eval(EvalMode::MonteCarlo { passes: 30, p: 0.2 })?);
            if f == 12 {
                let high = eval(EvalMode::MonteCarlo { passes: 30, p: 0.4 })?;
                run.sigma.push((mean_sigma_x(mc.last().unwrap()), mean_sigma_x(&high)));
            }
        }
        run.det.push(det);
        run.mc.push(mc);
    }
    Ok(run)
}

fn horizon_ordering(run: &Result<HorizonRun, String>) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    let mut ok = true;
    let mut rows = Vec::new();
    for (a, arch) in Architecture::ALL.iter().enumerate() {
        for (label, evals) in [("", &run.det[a]), ("+mc", &run.mc[a])] {
            let ades: Vec<f64> = evals.iter().map(|e| e.report.ade).collect();
            let fdes: Vec<f64> = evals.iter().map(|e| e.report.fde).collect();
            ok &= non_decreasing(&ades) && non_decreasing(&fdes);
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join("<=");
            rows.push(format!("{arch}{label} ADE {} FDE {}", fmt(&ades), fmt(&fdes)));
        }
    }
    ensure(ok, format!("F = {:?}: {}", run.horizons, rows.join("; ")))
}

fn dropout_ordering(run: &Result<HorizonRun, String>) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    let ok = run.sigma.iter().all(|(lo, hi)| hi > lo);
    let rows: Vec<String> = Architecture::ALL
        .iter()
        .zip(&run.sigma)
        .map(|(arch, (lo, hi))| format!("{arch} σx {lo:.4} (p 0.2) vs {hi:.4} (p 0.4)"))
        .collect();
    ensure(ok, rows.join(", "))
}

fn mc_improves_on_eth(run: &Result<EthRun, String>) -> Check {
    let run = run.as_ref().map_err(Clone::clone)?;
    let (det, mc) = (run.cnn_lstm_det.report.ade, run.cnn_lstm_mc.report.ade);
    ensure(mc < det, format!("CNN-LSTM+MC ADE {mc:.3} vs deterministic {det:.3}"))
}

fn reproducibility(root: &Path) -> Check {
    let mut produced: Vec<Vec<PathBuf>> = Vec::new();
    for run in ["a", "b"] {
        let dir = root.join(run);
        let mut cfg = ExperimentConfig {
            widths: Widths::Toy,
            seed: 11,
            horizons: vec![12],
            out_dir: dir.clone(),
            ..Default::default()
        };
        cfg.train.epochs = 4;
        let source = ImportSource::Synthetic { kind: SyntheticKind::Curvilinear, tracks: 40 };
        let cache = dir.join("dataset.json");
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let (ds, _) = cmd_import(&source, &cache, &cfg).map_err(|e| e.to_string())?;
        let mut files = vec![cache];
        for arch in Architecture::ALL {
            for o in cmd_train(&ds, arch, &cfg).map_err(|e| e.to_string())? {
                for mode in [EvalMode::Deterministic, EvalMode::MonteCarlo { passes: 10, p: 0.3 }] {
                    cmd_evaluate(&o.checkpoint, &ds, mode, cfg.seed, &dir, false).map_err(|e| e.to_string())?;
                }
                files.push(o.checkpoint);
            }
        }
        let mut reports: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".report.csv"))
            .collect();
        reports.sort();
        files.extend(reports);
        produced.push(files);
    }
    if produced[0].len() != produced[1].len() {
        return Err(format!("runs wrote {} vs {} files", produced[0].len(), produced[1].len()));
    }
    let mut differing = Vec::new();
    for (a, b) in produced[0].iter().zip(&produced[1]) {
        if fs::read(a).map_err(|e| e.to_string())? != fs::read(b).map_err(|e| e.to_string())? {
            differing.push(a.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let n = produced[0].len();
    ensure(differing.is_empty(), format!("{n} files compared (cache, 3 checkpoints, 6 reports); differing: {differing:?}"))
}

fn dataset_arithmetic() -> Check {
    let track = RawTrack {
        pedestrian_id: 1,
        samples: (0..29).map(|t| TrackPoint { frame: t * 10, x: 0.3 * t as f64, y: -0.1 * t as f64 }).collect(),
    };
    let windows = sliding_window_augment(&track, 0.4, 8, 12, 1).map_err(|e| e.to_string())?.len();
    if windows != 10 {
        return Err(format!("29-step track gave {windows} windows, expected 10"));
    }
    let path = env_path("TRAJMC_ETH_HOTEL").map_err(|e| format!("29-step track gives 10 windows; {e}"))?;
    let tracks = parse_annotations(&path, AnnotationFormat::Obsmat).map_err(|e| e.to_string())?;
    let ds: PreparedDataset = prepare(&tracks, &PrepareConfig::default()).map_err(|e| e.to_string())?;
    let n = ds.total_samples();
    ensure(
        (n as f64 - 1597.0).abs() <= 159.7,
        format!("29-step track gives 10 windows; HOTEL gives {n} sequences ({} train / {} test), target 1597 ± 10%", ds.train.len(), ds.test.len()),
    )
}

#[test]
fn acceptance() {
    std::io::stdout().lock().write_all(b"\n").unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let mut failed = Vec::new();
    let mut record = |id: &'static str, title: &str, started: Instant, outcome: Check| {
        emit(id, title, started, &outcome);
        if outcome.is_err() {
            failed.push(id);
        }
    };

    let t = Instant::now();
    record("1", "gradient fidelity", t, gradient_fidelity());
    let t = Instant::now();
    record("2", "per-step mean and variance", t, step_statistics());
    let t = Instant::now();
    record("3", "metric oracles", t, metric_fixtures());
    let t = Instant::now();
    record("4", "calibration", t, calibration());
    let t = Instant::now();
    record("5", "synthetic convergence", t, synthetic_convergence());

    let t = Instant::now();
    let eth = eth_run();
    record("6", "ETH table neighborhood", t, eth_table(&eth));

    let t = Instant::now();
    let horizons = horizon_run(&scratch.path().join("horizons"));
    record("7a", "error grows with horizon", t, horizon_ordering(&horizons));
    let t = Instant::now();
    record("7b", "spread grows with dropout", t, dropout_ordering(&horizons));
    let t = Instant::now();
    record("7c", "MC beats deterministic CNN-LSTM on ETH", t, mc_improves_on_eth(&eth));

    let t = Instant::now();
    record("8", "reproducibility", t, reproducibility(&scratch.path().join("repro")));
    let t = Instant::now();
    record("9", "dataset arithmetic", t, dataset_arithmetic());

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
