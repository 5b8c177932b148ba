use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{moments, GaussianState};
use crate::data::NormalizationStats;
use crate::diffcore::rng::derive_seed;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::{ForwardMode, ModelGraph, FEATURES};

/// N sampled future paths for one history, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDistribution {
    /// `samples[n][t]` is pass `n`'s position at step `t`.
    pub samples: Vec<Vec<[f64; 2]>>,
    pub p: f64,
    /// Moments at each step. With a single pass the covariance is zero.
    pub per_step: Vec<GaussianState>,
}

impl TrajectoryDistribution {
    pub fn new(samples: Vec<Vec<[f64; 2]>>, p: f64) -> Result<Self> {
        let steps = samples.first().map(Vec::len).unwrap_or(0);
        if steps == 0 {
            return Err(Error::Data("a distribution needs at least one non-empty sample path".into()));
        }
        if let Some(bad) = samples.iter().find(|s| s.len() != steps) {
            return Err(Error::dim("trajectory distribution", format!("{steps} steps per path"), bad.len().to_string()));
        }
        let per_step = (0..steps)
            .map(|t| moments(samples.iter().map(move |s| &s[t])).expect("non-empty"))
            .collect();
        Ok(TrajectoryDistribution { samples, p, per_step })
    }

    /// A single deterministic path viewed as an N = 1 distribution.
    pub fn point(path: Vec<[f64; 2]>) -> Result<Self> {
        TrajectoryDistribution::new(vec![path], 0.0)
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn horizon(&self) -> usize {
        self.per_step.len()
    }

    pub fn mean_path(&self) -> Vec<[f64; 2]> {
        self.per_step.iter().map(|g| g.mean).collect()
    }

    /// Largest distance between any two sampled paths at any step.
    pub fn max_pairwise_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for t in 0..self.horizon() {
            for a in &self.samples {
                for b in &self.samples {
                    best = best.max((a[t][0] - b[t][0]).hypot(a[t][1] - b[t][1]));
                }
            }
        }
        best
    }

    /// `step,mu_x,mu_y,sigma_x,sigma_y,cov_xy`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mu_x,mu_y,sigma_x,sigma_y,cov_xy\n");
        for (t, g) in self.per_step.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t + 1,
                g.mean[0],
                g.mean[1],
                g.sigma[0],
                g.sigma[1],
                g.covariance[0][1]
            );
        }
        out
    }

    /// `pass,step,x,y`
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("pass,step,x,y\n");
        for (n, path) in self.samples.iter().enumerate() {
            for (t, p) in path.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", n + 1, t + 1, p[0], p[1]);
            }
        }
        out
    }
}

/// Per-step mean and per-axis 1/N variance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub mean: [f64; 2],
    pub variance: [f64; 2],
}

pub fn distribution_stats(dist: &TrajectoryDistribution) -> Result<Vec<StepStats>> {
    if dist.n() < 2 {
        return Err(Error::Data(format!("variance needs at least 2 passes, got {}", dist.n())));
    }
    Ok(dist.per_step.iter().map(|g| StepStats { mean: g.mean, variance: g.variance() }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceStep {
    pub step: usize,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
    /// Axis whose variance exceeds the other's by more than `DOMINANCE_RATIO`.
    pub dominant: Option<Axis>,
}

pub const DOMINANCE_RATIO: f64 = 2.0;

pub fn covariance_profile(dist: &TrajectoryDistribution) -> Vec<CovarianceStep> {
    dist.per_step
        .iter()
        .enumerate()
        .map(|(t, g)| {
            let (sxx, syy) = (g.covariance[0][0], g.covariance[1][1]);
            let dominant = if sxx > DOMINANCE_RATIO * syy {
                Some(Axis::X)
            } else if syy > DOMINANCE_RATIO * sxx {
                Some(Axis::Y)
            } else {
                None
            };
            CovarianceStep { step: t + 1, sxx, syy, sxy: g.covariance[0][1], dominant }
        })
        .collect()
}

fn check_mc(n: usize, p: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::Parameter("at least one Monte-Carlo pass is required".into()));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!("dropout probability must lie in [0, 1), got {p}")));
    }
    Ok(())
}

/// Denormalized `(x, y)` paths, one per batch row, from a `[B, F, 4]` prediction.
pub(crate) fn positions(pred: &Tensor, stats: &NormalizationStats) -> Vec<Vec<[f64; 2]>> {
    let (b, f) = (pred.shape()[0], pred.shape()[1]);
    let meters = stats.invert_tensor(pred);
    let d = meters.data();
    (0..b)
        .map(|i| (0..f).map(|t| {
            let o = (i * f + t) * FEATURES;
            [d[o], d[o + 1]]
        }).collect())
        .collect()
}

/// Monte-Carlo dropout over a `[B, T, 4]` batch of normalized histories.
///
/// Pass `n` draws its masks from a stream seeded by `(seed, n)`; masks cover every
/// batch row independently. Results are in meters.
pub fn mc_sample_batch(
    graph: &ModelGraph,
    stats: &NormalizationStats,
    histories: &Tensor,
    n: usize,
    p: f64,
    seed: u64,
) -> Result<Vec<TrajectoryDistribution>> {
    check_mc(n, p)?;
    let batch = histories.shape().first().copied().unwrap_or(0);
    let mut per_row: Vec<Vec<Vec<[f64; 2]>>> = vec![Vec::with_capacity(n); batch];
    for pass in 0..n {
        let mode = if p > 0.0 {
            ForwardMode::Stochastic { p, seed: derive_seed(seed, &[0x3C, pass as u64]) }
        } else {
            ForwardMode::Deterministic
        };
        let pred = graph.predict(histories, mode)?;
        for (row, path) in per_row.iter_mut().zip(positions(&pred, stats)) {
            row.push(path);
        }
    }
    per_row.into_iter().map(|s| TrajectoryDistribution::new(s, p)).collect()
}

/// Monte-Carlo dropout for a single `[T, 4]` or `[1, T, 4]` normalized history.
pub fn mc_sample(
    graph: &ModelGraph,
    stats: &NormalizationStats,
    history: &Tensor,
    n: usize,
    p: f64,
    seed: u64,
) -> Result<TrajectoryDistribution> {
    let batched = match history.rank() {
        2 => history.clone().reshape(vec![1, history.shape()[0], history.shape()[1]])?,
        _ => history.clone(),
    };
    if batched.shape()[0] != 1 {
        return Err(Error::dim("mc_sample", "a single history", format!("{:?}", history.shape())));
    }
    Ok(mc_sample_batch(graph, stats, &batched, n, p, seed)?.remove(0))
}
