//! Velocity features, sliding windows, and sample batching.

use serde::{Deserialize, Serialize};

use super::parse::RawTrack;
use crate::diffcore::tensor::Tensor;
use crate::error::{Error, Result};
use crate::models::FEATURES;

/// Seconds per annotation step (8 steps span 3.2 s).
pub const DEFAULT_DT: f64 = 0.4;

/// Per-step features `[x, y, u, v]`: position in meters and velocity in m/s.
pub type Step = [f64; FEATURES];

/// One (history, future) window cut from a track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub history: Vec<Step>,
    pub future: Vec<Step>,
    pub source_id: i64,
    pub window_index: usize,
}

impl TrajectorySample {
    /// Ground-truth future positions.
    pub fn future_xy(&self) -> Vec<[f64; 2]> {
        self.future.iter().map(|s| [s[0], s[1]]).collect()
    }
}

/// Backward differences `(p_t - p_{t-1}) / dt`; the first sample copies the second's velocity.
pub fn derive_velocities(track: &RawTrack, dt: f64) -> Result<Vec<[f64; 2]>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    if track.len() < 2 {
        return Err(Error::Data(format!(
            "pedestrian {} has {} sample(s); velocities need at least 2",
            track.pedestrian_id,
            track.len()
        )));
    }
    let s = &track.samples;
    let mut vel = Vec::with_capacity(s.len());
    vel.push([0.0, 0.0]);
    for pair in s.windows(2) {
        vel.push([(pair[1].x - pair[0].x) / dt, (pair[1].y - pair[0].y) / dt]);
    }
    vel[0] = vel[1];
    Ok(vel)
}

/// Every window of `history_len + horizon` consecutive steps, at offsets `0, stride, 2·stride, …`.
///
/// Tracks shorter than one window yield nothing.
pub fn sliding_window_augment(
    track: &RawTrack,
    dt: f64,
    history_len: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<TrajectorySample>> {
    if history_len < 1 || horizon < 1 || stride < 1 {
        return Err(Error::Parameter(format!(
            "history, horizon and stride must be at least 1 (got {history_len}, {horizon}, {stride})"
        )));
    }
    let window = history_len + horizon;
    if track.len() < window {
        return Ok(Vec::new());
    }
    let vel = derive_velocities(track, dt)?;
    let steps: Vec<Step> = track
        .samples
        .iter()
        .zip(&vel)
        .map(|(p, v)| [p.x, p.y, v[0], v[1]])
        .collect();
    Ok((0..=track.len() - window)
        .step_by(stride)
        .enumerate()
        .map(|(window_index, start)| TrajectorySample {
            history: steps[start..start + history_len].to_vec(),
            future: steps[start + history_len..start + window].to_vec(),
            source_id: track.pedestrian_id,
            window_index,
        })
        .collect())
}

/// Stack histories into `[batch, T, 4]` and futures into `[batch, F, 4]`.
pub fn batch_tensors<'a, I>(samples: I) -> Result<(Tensor, Tensor)>
where
    I: IntoIterator<Item = &'a TrajectorySample>,
{
    let mut hist = Vec::new();
    let mut fut = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    let mut batch = 0;
    for s in samples {
        let d = (s.history.len(), s.future.len());
        match dims {
            None => dims = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::dim("batch", format!("windows of {expected:?} steps"), format!("{d:?}")));
            }
            _ => {}
        }
        hist.extend(s.history.iter().flatten());
        fut.extend(s.future.iter().flatten());
        batch += 1;
    }
    let (t, f) = dims.ok_or_else(|| Error::Data("cannot batch an empty sample set".into()))?;
    Ok((
        Tensor::new(vec![batch, t, FEATURES], hist)?,
        Tensor::new(vec![batch, f, FEATURES], fut)?,
    ))
}
