//! Flat `key = value` experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::AnnotationFormat;
use crate::error::{Error, Result};
use crate::models::Architecture;
use crate::training::TrainConfig;

/// Layer widths used when building graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Widths {
    Standard,
    Toy,
}

impl FromStr for Widths {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Widths::Standard),
            "toy" => Ok(Widths::Toy),
            other => Err(Error::Parameter(format!("unknown widths `{other}` (expected standard or toy)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: Vec<PathBuf>,
    pub format: AnnotationFormat,
    pub architectures: Vec<Architecture>,
    pub history_len: usize,
    pub horizons: Vec<usize>,
    /// Dropout probabilities swept at inference.
    pub dropouts: Vec<f64>,
    /// Dropout probability used while training.
    pub train_dropout: f64,
    pub mc_passes: usize,
    pub dt: f64,
    pub stride: usize,
    pub train_fraction: f64,
    pub widths: Widths,
    pub train: TrainConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: Vec::new(),
            format: AnnotationFormat::Obsmat,
            architectures: Architecture::ALL.to_vec(),
            history_len: 8,
            horizons: vec![12],
            dropouts: vec![0.2, 0.3, 0.4, 0.5],
            train_dropout: 0.2,
            mc_passes: 30,
            dt: 0.4,
            stride: 1,
            train_fraction: 0.79,
            widths: Widths::Standard,
            train: TrainConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parameter(format!("`{key}`: cannot parse `{s}`"))))
        .collect()
}

fn one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Parameter(format!("`{key}`: cannot parse `{value}`")))
}

impl ExperimentConfig {
    /// Set one field by name. Lists are comma-separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "data" => self.data = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect(),
            "format" => self.format = v.parse()?,
            "architectures" => {
                self.architectures = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?
            }
            "history_len" => self.history_len = one(key, v)?,
            "horizons" => self.horizons = list(key, v)?,
            "dropouts" => self.dropouts = list(key, v)?,
            "train_dropout" => self.train_dropout = one(key, v)?,
            "mc_passes" => self.mc_passes = one(key, v)?,
            "dt" => self.dt = one(key, v)?,
            "stride" => self.stride = one(key, v)?,
            "train_fraction" => self.train_fraction = one(key, v)?,
            "widths" => self.widths = v.parse()?,
            "epochs" => self.train.epochs = one(key, v)?,
            "batch_size" => self.train.batch_size = one(key, v)?,
            "learning_rate" => self.train.learning_rate = one(key, v)?,
            "validation_fraction" => self.train.validation_fraction = one(key, v)?,
            "early_stop_patience" => self.train.early_stop_patience = one(key, v)?,
            "lr_reduce_factor" => self.train.lr_reduce_factor = one(key, v)?,
            "lr_reduce_patience" => self.train.lr_reduce_patience = one(key, v)?,
            "min_lr" => self.train.min_lr = one(key, v)?,
            "seed" => self.seed = one(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(Error::Parameter(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            cfg.set(key.trim(), value).map_err(|e| match e {
                Error::Parameter(m) => Error::Parameter(format!("{origin}:{}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.history_len < 1 {
            return Err(Error::Parameter("history_len must be at least 1".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Parameter("horizons must be a non-empty list of positive step counts".into()));
        }
        if self.dropouts.is_empty() || self.dropouts.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::Parameter("dropouts must be a non-empty list of probabilities in [0, 1)".into()));
        }
        if self.architectures.is_empty() {
            return Err(Error::Parameter("architectures must not be empty".into()));
        }
        if self.mc_passes < 1 {
            return Err(Error::Parameter("mc_passes must be at least 1".into()));
        }
        self.train.validate()
    }
}
