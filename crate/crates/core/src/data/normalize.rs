use serde::{Deserialize, Serialize};

use super::samples::{Step, TrajectorySample};
use crate::diffcore::tensor::Tensor;
use crate::error::{Error, Result};
use crate::models::FEATURES;

/// Per-feature z-score statistics fitted on the training split.
///
/// A feature with zero spread is stored as mean 0, std 1 and passes through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; FEATURES],
    pub std: [f64; FEATURES],
}

impl NormalizationStats {
    pub fn identity() -> Self {
        NormalizationStats { mean: [0.0; FEATURES], std: [1.0; FEATURES] }
    }

    pub fn apply_step(&self, s: &Step) -> Step {
        std::array::from_fn(|k| (s[k] - self.mean[k]) / self.std[k])
    }

    pub fn invert_step(&self, s: &Step) -> Step {
        std::array::from_fn(|k| s[k] * self.std[k] + self.mean[k])
    }

    pub fn apply(&self, sample: &TrajectorySample) -> TrajectorySample {
        TrajectorySample {
            history: sample.history.iter().map(|s| self.apply_step(s)).collect(),
            future: sample.future.iter().map(|s| self.apply_step(s)).collect(),
            ..sample.clone()
        }
    }

    pub fn invert(&self, sample: &TrajectorySample) -> TrajectorySample {
        TrajectorySample {
            history: sample.history.iter().map(|s| self.invert_step(s)).collect(),
            future: sample.future.iter().map(|s| self.invert_step(s)).collect(),
            ..sample.clone()
        }
    }

    /// Invert a `[.., 4]` tensor of normalized features back to meters and m/s.
    pub fn invert_tensor(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for row in out.data_mut().chunks_exact_mut(FEATURES) {
            for k in 0..FEATURES {
                row[k] = row[k] * self.std[k] + self.mean[k];
            }
        }
        out
    }
}

/// Fit mean and population standard deviation over every history and future step.
pub fn fit_normalizer(train: &[TrajectorySample]) -> Result<NormalizationStats> {
    let rows = || train.iter().flat_map(|s| s.history.iter().chain(&s.future));
    let n = rows().count();
    if n == 0 {
        return Err(Error::Data("cannot fit normalization on an empty training set".into()));
    }
    let mut mean = [0.0; FEATURES];
    for r in rows() {
        for k in 0..FEATURES {
            mean[k] += r[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = [0.0; FEATURES];
    for r in rows() {
        for k in 0..FEATURES {
            var[k] += (r[k] - mean[k]).powi(2);
        }
    }
    let mut stats = NormalizationStats { mean, std: [1.0; FEATURES] };
    for k in 0..FEATURES {
        let sd = (var[k] / n as f64).sqrt();
        if sd > 0.0 && sd.is_finite() {
            stats.std[k] = sd;
        } else {
            stats.mean[k] = 0.0;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: &[[f64; 4]]) -> TrajectorySample {
        TrajectorySample {
            history: rows[..2].to_vec(),
            future: rows[2..].to_vec(),
            source_id: 0,
            window_index: 0,
        }
    }

    #[test]
    fn constant_feature_passes_through() {
        let s = sample(&[[1.0, 7.0, 0.0, 2.0], [2.0, 7.0, 1.0, 3.0], [4.0, 7.0, -1.0, 5.0]]);
        let stats = fit_normalizer(std::slice::from_ref(&s)).unwrap();
        assert_eq!(stats.mean[1], 0.0);
        assert_eq!(stats.std[1], 1.0);
        let n = stats.apply(&s);
        assert!(n.history.iter().chain(&n.future).all(|r| r[1] == 7.0));
    }

    #[test]
    fn round_trip_and_moments() {
        let s1 = sample(&[[1.0, -2.0, 0.3, 2.0], [2.5, 7.0, 1.0, 3.0], [4.0, 1.0, -1.0, 5.5]]);
        let s2 = sample(&[[-3.0, 0.5, 0.1, 2.2], [8.0, 1.5, 4.0, -3.0], [0.25, 2.0, -0.5, 1.0]]);
        let train = vec![s1, s2];
        let stats = fit_normalizer(&train).unwrap();
        for s in &train {
            let back = stats.invert(&stats.apply(s));
            for (a, b) in back.history.iter().chain(&back.future).zip(s.history.iter().chain(&s.future)) {
                for k in 0..4 {
                    assert!((a[k] - b[k]).abs() < 1e-12);
                }
            }
        }
        let normed: Vec<_> = train.iter().map(|s| stats.apply(s)).collect();
        let rows: Vec<_> = normed.iter().flat_map(|s| s.history.iter().chain(&s.future)).collect();
        for k in 0..4 {
            let m = rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
            let v = rows.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / rows.len() as f64;
            assert!(m.abs() < 1e-9 && (v.sqrt() - 1.0).abs() < 1e-9, "feature {k}: {m} {v}");
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(fit_normalizer(&[]), Err(Error::Data(_))));
    }
}
