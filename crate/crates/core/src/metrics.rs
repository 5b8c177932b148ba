//! Displacement errors, 2σ confidence scores, and report rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::TrajectoryDistribution;

fn check_paths(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::dim("displacement error", format!("{} predicted steps", truth.len()), pred.len().to_string()));
    }
    if pred.is_empty() {
        return Err(Error::Data("displacement error of an empty trajectory".into()));
    }
    Ok(())
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean Euclidean error over all predicted steps.
pub fn ade(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<f64> {
    check_paths(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(a, b)| dist(a, b)).sum::<f64>() / pred.len() as f64)
}

/// Euclidean error at the final step.
pub fn fde(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<f64> {
    check_paths(pred, truth)?;
    Ok(dist(pred.last().unwrap(), truth.last().unwrap()))
}

/// Percentage of steps whose true coordinate lies strictly within 2σ of the
/// predicted mean, per axis.
pub fn confidence_score(dist: &TrajectoryDistribution, truth: &[[f64; 2]]) -> Result<(f64, f64)> {
    if dist.n() < 2 {
        return Err(Error::Data(format!("confidence score needs at least 2 passes, got {}", dist.n())));
    }
    if truth.len() != dist.horizon() {
        return Err(Error::dim("confidence score", format!("{} truth steps", dist.horizon()), truth.len().to_string()));
    }
    let mut inside = [0usize; 2];
    for (g, y) in dist.per_step.iter().zip(truth) {
        for k in 0..2 {
            if (y[k] - g.mean[k]).abs() < 2.0 * g.sigma[k] {
                inside[k] += 1;
            }
        }
    }
    let f = truth.len() as f64;
    Ok((100.0 * inside[0] as f64 / f, 100.0 * inside[1] as f64 / f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub ade: f64,
    pub fde: f64,
    /// Present for distributions with at least 2 passes.
    pub cs: Option<(f64, f64)>,
}

/// Scores the mean path of `dist`; the confidence score is skipped for single passes.
pub fn score(dist: &TrajectoryDistribution, truth: &[[f64; 2]]) -> Result<TrajectoryMetrics> {
    let mean = dist.mean_path();
    Ok(TrajectoryMetrics {
        ade: ade(&mean, truth)?,
        fde: fde(&mean, truth)?,
        cs: if dist.n() >= 2 { Some(confidence_score(dist, truth)?) } else { None },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub ade: f64,
    pub fde: f64,
    pub cs: Option<(f64, f64)>,
    pub count: usize,
}

/// Unweighted means over trajectories. CS is averaged only if every trajectory has one.
pub fn aggregate(items: &[TrajectoryMetrics]) -> Result<Aggregate> {
    if items.is_empty() {
        return Err(Error::Data("cannot aggregate an empty set of trajectories".into()));
    }
    let n = items.len() as f64;
    let mean = |f: &dyn Fn(&TrajectoryMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
    let cs = if items.iter().all(|m| m.cs.is_some()) {
        Some((mean(&|m| m.cs.unwrap().0), mean(&|m| m.cs.unwrap().1)))
    } else {
        None
    };
    Ok(Aggregate { ade: mean(&|m| m.ade), fde: mean(&|m| m.fde), cs, count: items.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub p: f64,
    pub horizon_s: f64,
    pub ade: f64,
    pub fde: f64,
    pub cs_x: Option<f64>,
    pub cs_y: Option<f64>,
    pub n_traj: usize,
    pub n_mc: usize,
}

impl EvaluationReport {
    pub fn from_aggregate(model: impl Into<String>, p: f64, horizon_s: f64, agg: &Aggregate, n_mc: usize) -> Self {
        EvaluationReport {
            model: model.into(),
            p,
            horizon_s,
            ade: agg.ade,
            fde: agg.fde,
            cs_x: agg.cs.map(|c| c.0),
            cs_y: agg.cs.map(|c| c.1),
            n_traj: agg.count,
            n_mc,
        }
    }
}

pub const REPORT_HEADER: &str = "model,p,horizon_s,ade,fde,cs_x,cs_y,n_traj,n_mc";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn reports_to_csv(reports: &[EvaluationReport]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.p,
            r.horizon_s,
            r.ade,
            r.fde,
            opt(r.cs_x),
            opt(r.cs_y),
            r.n_traj,
            r.n_mc
        );
    }
    out
}
