//! Import pipeline and the on-disk prepared-dataset cache.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::normalize::{fit_normalizer, NormalizationStats};
use super::parse::RawTrack;
use super::samples::{sliding_window_augment, TrajectorySample};
use super::split::split_dataset;
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "trajmc-dataset/v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub history_len: usize,
    pub horizon: usize,
    pub dt: f64,
    pub stride: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig { history_len: 8, horizon: 12, dt: 0.4, stride: 1, train_fraction: 0.79, seed: 0 }
    }
}

/// Windows split into train and test, in meters, with the training normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedDataset {
    pub format: String,
    pub config: PrepareConfig,
    pub tracks: usize,
    pub stats: NormalizationStats,
    pub train: Vec<TrajectorySample>,
    pub test: Vec<TrajectorySample>,
}

impl PreparedDataset {
    pub fn history_len(&self) -> usize {
        self.config.history_len
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn total_samples(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn normalized_train(&self) -> Vec<TrajectorySample> {
        self.train.iter().map(|s| self.stats.apply(s)).collect()
    }

    pub fn normalized_test(&self) -> Vec<TrajectorySample> {
        self.test.iter().map(|s| self.stats.apply(s)).collect()
    }

    /// The same windows with futures truncated to `horizon` steps. Membership of both
    /// splits is unchanged; normalization is refitted on the truncated training set.
    pub fn with_horizon(&self, horizon: usize) -> Result<PreparedDataset> {
        if horizon < 1 || horizon > self.config.horizon {
            return Err(Error::Parameter(format!(
                "horizon {horizon} is outside 1..={} stored in the dataset",
                self.config.horizon
            )));
        }
        let cut = |v: &[TrajectorySample]| -> Vec<TrajectorySample> {
            v.iter()
                .map(|s| TrajectorySample { future: s.future[..horizon].to_vec(), ..s.clone() })
                .collect()
        };
        let train = cut(&self.train);
        let stats = fit_normalizer(&train)?;
        Ok(PreparedDataset {
            format: self.format.clone(),
            config: PrepareConfig { horizon, ..self.config },
            tracks: self.tracks,
            stats,
            train,
            test: cut(&self.test),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<PreparedDataset> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let ds: PreparedDataset = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: not a prepared dataset: {e}", path.display())))?;
        if ds.format != DATASET_FORMAT {
            return Err(Error::Data(format!(
                "{}: format `{}` is not supported (expected {DATASET_FORMAT})",
                path.display(),
                ds.format
            )));
        }
        Ok(ds)
    }
}

/// Velocities, windows, track-level split, and training-set normalization.
///
/// Tracks with fewer than two samples are skipped with a warning.
pub fn prepare(tracks: &[RawTrack], cfg: &PrepareConfig) -> Result<PreparedDataset> {
    let mut samples = Vec::new();
    let mut used = 0;
    for track in tracks {
        if track.len() < 2 {
            log::warn!("skipping pedestrian {}: {} sample(s)", track.pedestrian_id, track.len());
            continue;
        }
        let w = sliding_window_augment(track, cfg.dt, cfg.history_len, cfg.horizon, cfg.stride)?;
        if !w.is_empty() {
            used += 1;
        }
        samples.extend(w);
    }
    if samples.is_empty() {
        return Err(Error::Data(format!(
            "no track is long enough for {} + {} steps",
            cfg.history_len, cfg.horizon
        )));
    }
    let (train, test) = split_dataset(&samples, cfg.train_fraction, cfg.seed)?;
    let stats = fit_normalizer(&train)?;
    Ok(PreparedDataset { format: DATASET_FORMAT.to_string(), config: *cfg, tracks: used, stats, train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{curvilinear_corpus, SyntheticConfig};

    fn corpus() -> Vec<RawTrack> {
        curvilinear_corpus(&SyntheticConfig { tracks: 12, ..Default::default() })
    }

    #[test]
    fn pipeline_counts() {
        let tracks = corpus();
        let ds = prepare(&tracks, &PrepareConfig::default()).unwrap();
        let expected: usize = tracks.iter().map(|t| t.len().saturating_sub(19)).sum();
        assert_eq!(ds.total_samples(), expected);
        assert!(!ds.train.is_empty() && !ds.test.is_empty());
        assert_eq!(ds.stats, fit_normalizer(&ds.train).unwrap());
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let ds = prepare(&corpus(), &PrepareConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.json");
        ds.save(&path).unwrap();
        assert_eq!(PreparedDataset::load(&path).unwrap(), ds);
        let first = fs::read(&path).unwrap();
        ds.save(&path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn truncated_horizon() {
        let ds = prepare(&corpus(), &PrepareConfig::default()).unwrap();
        let short = ds.with_horizon(4).unwrap();
        assert_eq!(short.horizon(), 4);
        assert_eq!(short.test.len(), ds.test.len());
        assert_eq!(short.test[0].future[..], ds.test[0].future[..4]);
        assert!(ds.with_horizon(13).is_err() && ds.with_horizon(0).is_err());
    }

    #[test]
    fn wrong_format_tag() {
        let mut ds = prepare(&corpus(), &PrepareConfig::default()).unwrap();
        ds.format = "other/v0".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.json");
        ds.save(&path).unwrap();
        assert!(matches!(PreparedDataset::load(&path), Err(Error::Data(_))));
    }

    #[test]
    fn too_short_corpus() {
        let tracks = curvilinear_corpus(&SyntheticConfig { tracks: 3, min_len: 5, max_len: 10, ..Default::default() });
        assert!(matches!(prepare(&tracks, &PrepareConfig::default()), Err(Error::Data(_))));
    }
}
