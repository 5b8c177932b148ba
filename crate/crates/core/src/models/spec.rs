use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of per-step features: position `x, y` and velocity `u, v`.
pub const FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "lstm_ed")]
    LstmEd,
    #[serde(rename = "cnn1d")]
    Cnn1d,
    #[serde(rename = "cnn_lstm")]
    CnnLstm,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::LstmEd, Architecture::Cnn1d, Architecture::CnnLstm];

    pub fn id(self) -> &'static str {
        match self {
            Architecture::LstmEd => "lstm_ed",
            Architecture::Cnn1d => "cnn1d",
            Architecture::CnnLstm => "cnn_lstm",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm_ed" | "lstm" => Ok(Architecture::LstmEd),
            "cnn1d" | "cnn" => Ok(Architecture::Cnn1d),
            "cnn_lstm" => Ok(Architecture::CnnLstm),
            other => Err(Error::Parameter(format!(
                "unknown architecture `{other}` (expected lstm_ed, cnn1d or cnn_lstm)"
            ))),
        }
    }
}

/// Hyperparameters that fully determine a graph's structure and initial weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub history_len: usize,
    pub horizon: usize,
    /// Dropout probability used while training.
    pub dropout: f64,
    /// `lstm_ed`: `[encoder_1, encoder_2, decoder]`; `cnn_lstm`: `[decoder]`.
    pub lstm_units: Vec<usize>,
    /// `cnn1d`: three filter counts; `cnn_lstm`: two.
    pub conv_filters: Vec<usize>,
    pub kernel_size: usize,
    pub pool: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    /// Full-size widths.
    pub fn standard(architecture: Architecture, history_len: usize, horizon: usize, dropout: f64) -> Self {
        let (lstm_units, conv_filters) = match architecture {
            Architecture::LstmEd => (vec![64, 64, 64], vec![]),
            Architecture::Cnn1d => (vec![], vec![128, 64, 64]),
            Architecture::CnnLstm => (vec![64], vec![128, 64]),
        };
        ModelSpec {
            architecture,
            history_len,
            horizon,
            dropout,
            lstm_units,
            conv_filters,
            kernel_size: 5,
            pool: 2,
            init_seed: 0,
        }
    }

    /// Reduced widths for gradient checks and quick experiments.
    pub fn toy(architecture: Architecture, history_len: usize, horizon: usize, dropout: f64) -> Self {
        let (lstm_units, conv_filters) = match architecture {
            Architecture::LstmEd => (vec![6, 5, 4], vec![]),
            Architecture::Cnn1d => (vec![], vec![8, 4, 4]),
            Architecture::CnnLstm => (vec![5], vec![8, 4]),
        };
        ModelSpec {
            lstm_units,
            conv_filters,
            ..ModelSpec::standard(architecture, history_len, horizon, dropout)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.init_seed = seed;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.history_len < 1 || self.horizon < 1 {
            return Err(Error::Parameter(format!(
                "history and horizon must be at least 1 step (got T={}, F={})",
                self.history_len, self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!(
                "dropout probability must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.kernel_size < 1 || self.pool < 1 {
            return Err(Error::Parameter("kernel size and pool must be at least 1".into()));
        }
        let (want_lstm, want_conv) = match self.architecture {
            Architecture::LstmEd => (3, 0),
            Architecture::Cnn1d => (0, 3),
            Architecture::CnnLstm => (1, 2),
        };
        if self.lstm_units.len() != want_lstm || self.conv_filters.len() != want_conv {
            return Err(Error::Parameter(format!(
                "{} expects {want_lstm} LSTM widths and {want_conv} filter counts, got {:?} and {:?}",
                self.architecture, self.lstm_units, self.conv_filters
            )));
        }
        if self.lstm_units.iter().chain(&self.conv_filters).any(|&w| w == 0) {
            return Err(Error::Parameter("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// How dropout layers behave during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardMode {
    /// Dropout layers are skipped.
    Deterministic,
    /// Every dropout layer draws a fresh mask from a stream seeded by `seed`.
    Stochastic { p: f64, seed: u64 },
}

impl ForwardMode {
    pub(crate) fn validate(&self) -> Result<()> {
        if let ForwardMode::Stochastic { p, .. } = self {
            if !(0.0..1.0).contains(p) {
                return Err(Error::Parameter(format!(
                    "dropout probability must lie in [0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }
}
