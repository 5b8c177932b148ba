use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Widths};
use crate::data::synthetic::{constant_velocity_corpus, curvilinear_corpus, SyntheticConfig};
use crate::data::{
    batch_tensors, parse_annotations, prepare, AnnotationFormat, NormalizationStats, PrepareConfig, PreparedDataset,
    RawTrack, TrajectorySample,
};
use crate::diffcore::rng::derive_seed;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, reports_to_csv, score, EvaluationReport, TrajectoryMetrics};
use crate::models::{build, Architecture, ModelGraph, ModelSpec};
use crate::training::{load_checkpoint, save_checkpoint, train, Checkpoint, TrainConfig, TrainLog};
use crate::uncertainty::{mc_sample_batch, TrajectoryDistribution};

const EVAL_CHUNK: usize = 64;
/// Pedestrian ids of the k-th annotation file are offset by k times this.
const FILE_ID_STRIDE: i64 = 1_000_000;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn prepare_config(cfg: &ExperimentConfig) -> PrepareConfig {
    PrepareConfig {
        history_len: cfg.history_len,
        horizon: cfg.horizons.iter().copied().max().unwrap_or(12),
        dt: cfg.dt,
        stride: cfg.stride,
        train_fraction: cfg.train_fraction,
        seed: cfg.seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    ConstantVelocity,
    Curvilinear,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" | "constant_velocity" => Ok(SyntheticKind::ConstantVelocity),
            "curvilinear" => Ok(SyntheticKind::Curvilinear),
            other => Err(Error::Parameter(format!("unknown synthetic corpus `{other}` (expected constant or curvilinear)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImportSource {
    Annotations { paths: Vec<PathBuf>, format: AnnotationFormat },
    Synthetic { kind: SyntheticKind, tracks: usize },
}

pub fn load_tracks(source: &ImportSource, seed: u64, dt: f64) -> Result<Vec<RawTrack>> {
    match source {
        ImportSource::Annotations { paths, format } => {
            if paths.is_empty() {
                return Err(Error::Parameter("no annotation file given".into()));
            }
            let mut all = Vec::new();
            for (k, path) in paths.iter().enumerate() {
                let offset = if paths.len() > 1 { k as i64 * FILE_ID_STRIDE } else { 0 };
                all.extend(parse_annotations(path, *format)?.into_iter().map(|mut t| {
                    t.pedestrian_id += offset;
                    t
                }));
            }
            Ok(all)
        }
        ImportSource::Synthetic { kind, tracks } => {
            let cfg = SyntheticConfig { tracks: *tracks, dt, seed, ..Default::default() };
            Ok(match kind {
                SyntheticKind::ConstantVelocity => constant_velocity_corpus(&cfg),
                SyntheticKind::Curvilinear => curvilinear_corpus(&cfg),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportSummary {
    pub tracks: usize,
    pub tracks_used: usize,
    pub samples: usize,
    pub train: usize,
    pub test: usize,
}

impl std::fmt::Display for ImportSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} tracks ({} long enough), {} sequences: {} train, {} test",
            self.tracks, self.tracks_used, self.samples, self.train, self.test
        )
    }
}

/// Parse, window, split and normalize, then write the prepared-dataset cache to `out`.
pub fn cmd_import(source: &ImportSource, out: &Path, cfg: &ExperimentConfig) -> Result<(PreparedDataset, ImportSummary)> {
    cfg.validate()?;
    let tracks = load_tracks(source, cfg.seed, cfg.dt)?;
    let ds = prepare(&tracks, &prepare_config(cfg))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    ds.save(out)?;
    let summary = ImportSummary {
        tracks: tracks.len(),
        tracks_used: ds.tracks,
        samples: ds.total_samples(),
        train: ds.train.len(),
        test: ds.test.len(),
    };
    Ok((ds, summary))
}

fn fmt_p(p: f64) -> String {
    format!("{p}")
}

pub fn checkpoint_name(arch: Architecture, history_len: usize, horizon: usize, p: f64, seed: u64) -> String {
    format!("{arch}_T{history_len}_F{horizon}_p{}_s{seed}", fmt_p(p))
}

pub fn model_spec(cfg: &ExperimentConfig, arch: Architecture, horizon: usize) -> ModelSpec {
    let spec = match cfg.widths {
        Widths::Standard => ModelSpec::standard(arch, cfg.history_len, horizon, cfg.train_dropout),
        Widths::Toy => ModelSpec::toy(arch, cfg.history_len, horizon, cfg.train_dropout),
    };
    spec.with_seed(cfg.seed)
}

fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig { seed: cfg.seed, ..cfg.train }
}

/// Dataset windows cut to `horizon`, checking the history length.
fn dataset_for(ds: &PreparedDataset, history_len: usize, horizon: usize) -> Result<PreparedDataset> {
    if ds.history_len() != history_len {
        return Err(Error::Data(format!(
            "dataset has T={} but the model expects T={history_len}",
            ds.history_len()
        )));
    }
    if horizon == ds.horizon() {
        Ok(ds.clone())
    } else if horizon < ds.horizon() {
        ds.with_horizon(horizon)
    } else {
        Err(Error::Data(format!("dataset stores F={} steps, {horizon} requested", ds.horizon())))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub log: TrainLog,
    pub graph: ModelGraph,
    pub stats: NormalizationStats,
}

/// Train one model per requested horizon; writes `<name>.ckpt` and `<name>.log.csv` into `cfg.out_dir`.
pub fn cmd_train(ds: &PreparedDataset, arch: Architecture, cfg: &ExperimentConfig) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    ensure_dir(&cfg.out_dir)?;
    let mut outcomes = Vec::new();
    for &horizon in &cfg.horizons {
        outcomes.push(train_one(ds, arch, horizon, cfg, &cfg.out_dir)?);
    }
    Ok(outcomes)
}

fn train_one(
    ds: &PreparedDataset,
    arch: Architecture,
    horizon: usize,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<TrainOutcome> {
    let ds = dataset_for(ds, cfg.history_len, horizon)?;
    let mut graph = build(&model_spec(cfg, arch, horizon))?;
    let tc = train_config(cfg);
    log::info!("training {arch} at F={horizon} on {} windows", ds.train.len());
    let log = train(&mut graph, &ds.normalized_train(), &tc)?;
    let name = checkpoint_name(arch, cfg.history_len, horizon, cfg.train_dropout, cfg.seed);
    let checkpoint = dir.join(format!("{name}.ckpt"));
    let log_path = dir.join(format!("{name}.log.csv"));
    save_checkpoint(&graph, &ds.stats, ds.config.dt, Some(&tc), &checkpoint)?;
    write(&log_path, &log.to_csv())?;
    Ok(TrainOutcome { checkpoint, log_path, log, graph, stats: ds.stats })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Deterministic,
    MonteCarlo { passes: usize, p: f64 },
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub distributions: Vec<TrajectoryDistribution>,
    pub metrics: Vec<TrajectoryMetrics>,
}

/// Score `graph` on test windows given in meters. MC chunks draw masks from `(seed, chunk)`.
pub fn evaluate_model(
    graph: &ModelGraph,
    stats: &NormalizationStats,
    test: &[TrajectorySample],
    mode: EvalMode,
    seed: u64,
    dt: f64,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Data("no test trajectories to evaluate".into()));
    }
    let arch = graph.spec().architecture;
    let mut distributions = Vec::with_capacity(test.len());
    for (c, chunk) in test.chunks(EVAL_CHUNK).enumerate() {
        let normalized: Vec<TrajectorySample> = chunk.iter().map(|s| stats.apply(s)).collect();
        let (x, _) = batch_tensors(&normalized)?;
        match mode {
            EvalMode::Deterministic => {
                distributions.extend(mc_sample_batch(graph, stats, &x, 1, 0.0, 0)?);
            }
            EvalMode::MonteCarlo { passes, p } => {
                distributions.extend(mc_sample_batch(graph, stats, &x, passes, p, derive_seed(seed, &[c as u64]))?);
            }
        }
    }
    let metrics = distributions
        .iter()
        .zip(test)
        .map(|(d, s)| score(d, &s.future_xy()))
        .collect::<Result<Vec<_>>>()?;
    let agg = aggregate(&metrics)?;
    let horizon_s = graph.horizon() as f64 * dt;
    let report = match mode {
        EvalMode::Deterministic => EvaluationReport::from_aggregate(arch.id(), 0.0, horizon_s, &agg, 1),
        EvalMode::MonteCarlo { passes, p } => {
            EvaluationReport::from_aggregate(format!("{arch}+mc"), p, horizon_s, &agg, passes)
        }
    };
    Ok(Evaluation { report, distributions, metrics })
}

/// Evaluate a checkpoint on the cached test split. Writes the report CSV and one
/// distribution CSV per trajectory (plus raw samples if `write_samples`) under `out_dir`.
pub fn cmd_evaluate(
    checkpoint: &Path,
    ds: &PreparedDataset,
    mode: EvalMode,
    seed: u64,
    out_dir: &Path,
    write_samples: bool,
) -> Result<Evaluation> {
    let ck = load_checkpoint(checkpoint)?;
    let test_ds = dataset_for(ds, ck.graph.history_len(), ck.graph.horizon())?;
    let eval = evaluate_model(&ck.graph, ck.stats(), &test_ds.test, mode, seed, ck.meta.dt)?;
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let tag = match mode {
        EvalMode::Deterministic => "det".to_string(),
        EvalMode::MonteCarlo { passes, p } => format!("mc_p{}_n{passes}", fmt_p(p)),
    };
    ensure_dir(out_dir)?;
    write(&out_dir.join(format!("{stem}.{tag}.report.csv")), &reports_to_csv(std::slice::from_ref(&eval.report)))?;
    let dist_dir = out_dir.join(format!("{stem}.{tag}.distributions"));
    ensure_dir(&dist_dir)?;
    for (i, d) in eval.distributions.iter().enumerate() {
        write(&dist_dir.join(format!("traj{i:05}.csv")), &d.to_csv())?;
        if write_samples {
            write(&dist_dir.join(format!("traj{i:05}.samples.csv")), &d.samples_csv())?;
        }
    }
    Ok(eval)
}

/// Checkpoints in `dir` keyed by (architecture, T, F); ties resolved by file name order,
/// preferring the canonical name for the configured training dropout and seed.
fn index_checkpoints(dir: &Path, cfg: &ExperimentConfig) -> Result<BTreeMap<(Architecture, usize, usize), (PathBuf, Checkpoint)>> {
    let mut found = BTreeMap::new();
    if !dir.exists() {
        return Ok(found);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    paths.sort();
    for path in paths {
        let ck = load_checkpoint(&path)?;
        let arch = ck.graph.spec().architecture;
        let key = (arch, ck.graph.history_len(), ck.graph.horizon());
        let canonical = checkpoint_name(arch, key.1, key.2, cfg.train_dropout, cfg.seed);
        let is_canonical = path.file_stem().is_some_and(|s| s == canonical.as_str());
        if is_canonical || !found.contains_key(&key) {
            found.insert(key, (path, ck));
        }
    }
    Ok(found)
}

/// MC evaluation of every (architecture, horizon, p) cell; one report row per cell.
///
/// Models are looked up in `checkpoint_dir`. Missing cells are an error listing the
/// gaps unless `train_missing` is set, in which case they are trained and saved there.
pub fn cmd_sweep(
    checkpoint_dir: &Path,
    ds: &PreparedDataset,
    cfg: &ExperimentConfig,
    train_missing: bool,
) -> Result<Vec<EvaluationReport>> {
    cfg.validate()?;
    let mut index = index_checkpoints(checkpoint_dir, cfg)?;
    let mut gaps = Vec::new();
    for &arch in &cfg.architectures {
        for &f in &cfg.horizons {
            if !index.contains_key(&(arch, cfg.history_len, f)) {
                gaps.push((arch, f));
            }
        }
    }
    if !gaps.is_empty() {
        if !train_missing {
            let list: Vec<String> = gaps.iter().map(|(a, f)| format!("{a} F={f}")).collect();
            return Err(Error::Data(format!(
                "no checkpoint in {} for: {}",
                checkpoint_dir.display(),
                list.join(", ")
            )));
        }
        ensure_dir(checkpoint_dir)?;
        for (arch, f) in gaps {
            let outcome = train_one(ds, arch, f, cfg, checkpoint_dir)?;
            let ck = load_checkpoint(&outcome.checkpoint)?;
            index.insert((arch, cfg.history_len, f), (outcome.checkpoint, ck));
        }
    }

    let mut rows = Vec::new();
    for &arch in &cfg.architectures {
        for &f in &cfg.horizons {
            let (path, ck) = &index[&(arch, cfg.history_len, f)];
            let test_ds = dataset_for(ds, cfg.history_len, f)?;
            for &p in &cfg.dropouts {
                log::info!("sweep {arch} F={f} p={p} ({})", path.display());
                let mode = EvalMode::MonteCarlo { passes: cfg.mc_passes, p };
                rows.push(evaluate_model(&ck.graph, ck.stats(), &test_ds.test, mode, cfg.seed, ck.meta.dt)?.report);
            }
        }
    }
    ensure_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("sweep.csv"), &reports_to_csv(&rows))?;
    Ok(rows)
}
