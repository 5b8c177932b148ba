use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::callbacks::{EarlyStopping, ReduceLrOnPlateau};
use crate::data::split::shuffled_ids;
use crate::data::{batch_tensors, TrajectorySample};
use crate::diffcore::param::{adam_step, AdamConfig};
use crate::diffcore::rng::{derive_seed, stream};
use crate::diffcore::{mse_loss, Tensor};
use crate::error::{Error, Result};
use crate::models::{ForwardMode, ModelGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub early_stop_patience: usize,
    pub lr_reduce_factor: f64,
    pub lr_reduce_patience: usize,
    pub min_lr: f64,
    /// Smallest drop in validation MSE that resets the patience counters.
    pub min_delta: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            validation_fraction: 0.10,
            early_stop_patience: 15,
            lr_reduce_factor: 0.5,
            lr_reduce_patience: 5,
            min_lr: 1e-5,
            min_delta: 1e-6,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor < 1.0) {
            return Err(Error::Parameter(format!(
                "learning-rate reduction factor must lie in (0, 1), got {}",
                self.lr_reduce_factor
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.min_lr >= 0.0) {
            return Err(Error::Parameter(format!(
                "learning rates must be positive (lr {}, min_lr {})",
                self.learning_rate, self.min_lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored at exit.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn val_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.val_mse).collect()
    }

    pub fn best_val_mse(&self) -> Option<f64> {
        self.epochs.iter().map(|e| e.val_mse).min_by(f64::total_cmp)
    }

    /// Everything except wall-clock times, which vary between runs.
    pub fn same_curves(&self, other: &TrainLog) -> bool {
        self.epochs.len() == other.epochs.len()
            && self.best_epoch == other.best_epoch
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.train_mse.to_bits() == b.train_mse.to_bits()
                    && a.val_mse.to_bits() == b.val_mse.to_bits()
                    && a.lr.to_bits() == b.lr.to_bits()
            })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,val_mse,lr,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{},{:.3}", e.epoch, e.train_mse, e.val_mse, e.lr, e.seconds);
        }
        out
    }
}

/// Split training windows into (fit, validation) by pedestrian id: the last
/// `fraction` of a seeded id shuffle is held out.
pub fn validation_split(
    samples: &[TrajectorySample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<&TrajectorySample>, Vec<&TrajectorySample>)> {
    let ids = shuffled_ids(samples, seed, 0x7a1);
    if ids.len() < 2 {
        return Err(Error::Data(format!(
            "validation needs windows from at least 2 pedestrians, found {}",
            ids.len()
        )));
    }
    let held = ((ids.len() as f64 * fraction).round() as usize).clamp(1, ids.len() - 1);
    let val_ids: BTreeSet<i64> = ids[ids.len() - held..].iter().copied().collect();
    Ok(samples.iter().partition(|s| !val_ids.contains(&s.source_id)))
}

/// Deterministic MSE over `samples`, evaluated in chunks of `batch_size`.
pub fn evaluate_mse(graph: &ModelGraph, samples: &[&TrajectorySample], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in samples.chunks(batch_size.max(1)) {
        let (x, y) = batch_tensors(chunk.iter().copied())?;
        let pred = graph.predict(&x, ForwardMode::Deterministic)?;
        let (loss, _) = mse_loss(&pred, &y)?;
        total += loss * y.len() as f64;
        count += y.len();
    }
    Ok(total / count as f64)
}

fn snapshot(graph: &ModelGraph) -> Vec<Tensor> {
    graph.parameters().iter().map(|p| p.value.clone()).collect()
}

/// Fit `graph` on normalized `samples` with Adam on MSE.
///
/// Each epoch shuffles the fitting windows under the seed and trains with dropout
/// active at the graph's rate. Parameters from the epoch with the lowest validation
/// MSE are restored before returning.
pub fn train(graph: &mut ModelGraph, samples: &[TrajectorySample], cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok(log);
    }
    let (fit, val) = validation_split(samples, cfg.validation_fraction, cfg.seed)?;
    let p = graph.spec().dropout;
    let mut early = EarlyStopping::new(cfg.early_stop_patience, cfg.min_delta);
    let mut plateau = ReduceLrOnPlateau::new(cfg.lr_reduce_patience, cfg.lr_reduce_factor, cfg.min_lr, cfg.min_delta);
    let mut lr = cfg.learning_rate;
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let mut order: Vec<usize> = (0..fit.len()).collect();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.sort_unstable();
        order.shuffle(&mut stream(cfg.seed, &[0xE0, epoch as u64]));
        let mut sum = 0.0;
        let mut seen = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = batch_tensors(idx.iter().map(|&i| fit[i]))?;
            let mode = if p > 0.0 {
                ForwardMode::Stochastic { p, seed: derive_seed(cfg.seed, &[0xD0, epoch as u64, b as u64]) }
            } else {
                ForwardMode::Deterministic
            };
            let loss = graph.loss_and_gradient(&x, &y, mode)?;
            if !loss.is_finite() {
                return Err(Error::Numeric { context: format!("training loss at epoch {epoch}, batch {}", b + 1) });
            }
            for param in graph.parameters_mut() {
                adam_step(param, lr, &cfg.adam).map_err(|e| match e {
                    Error::Numeric { context } => {
                        Error::Numeric { context: format!("{context} at epoch {epoch}, batch {}", b + 1) }
                    }
                    other => other,
                })?;
            }
            sum += loss * idx.len() as f64;
            seen += idx.len();
        }
        let val_mse = evaluate_mse(graph, &val, cfg.batch_size)?;
        if !val_mse.is_finite() {
            return Err(Error::Numeric { context: format!("validation loss at epoch {epoch}") });
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_mse: sum / seen as f64,
            val_mse,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });
        log::info!(
            "epoch {epoch:>3}  train {:.6}  val {val_mse:.6}  lr {lr:.2e}",
            sum / seen as f64
        );
        if best.as_ref().is_none_or(|(v, _, _)| val_mse < *v) {
            best = Some((val_mse, epoch, snapshot(graph)));
        }
        if early.observe(val_mse) {
            log.stopped_early = epoch < cfg.epochs;
            break;
        }
        lr = plateau.observe(val_mse, lr);
    }

    if let Some((_, epoch, values)) = best {
        for (param, value) in graph.parameters_mut().iter_mut().zip(values) {
            param.value = value;
        }
        log.best_epoch = Some(epoch);
    }
    Ok(log)
}
