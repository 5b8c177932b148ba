//! Plateau detection on the validation curve.

/// Stops after `patience` consecutive epochs without an improvement of at least `min_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
    best: f64,
    best_epoch: Option<usize>,
    wait: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping { patience, min_delta, best: f64::INFINITY, best_epoch: None, wait: 0, epoch: 0 }
    }

    /// Feed the next epoch's validation MSE; returns true when training should stop.
    pub fn observe(&mut self, val: f64) -> bool {
        self.epoch += 1;
        if val < self.best - self.min_delta {
            self.best = val;
            self.best_epoch = Some(self.epoch);
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        self.wait >= self.patience
    }

    /// 1-based epoch of the last counted improvement.
    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

/// 1-based epoch after which training stops, or `None` if it runs through the whole curve.
pub fn early_stopping(val_curve: &[f64], patience: usize, min_delta: f64) -> Option<usize> {
    let mut cb = EarlyStopping::new(patience, min_delta);
    val_curve.iter().position(|&v| cb.observe(v)).map(|i| i + 1)
}

/// Multiplies the learning rate by `factor` after `patience` epochs without improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReduceLrOnPlateau {
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    pub min_delta: f64,
    best: f64,
    wait: usize,
}

impl ReduceLrOnPlateau {
    pub fn new(patience: usize, factor: f64, min_lr: f64, min_delta: f64) -> Self {
        ReduceLrOnPlateau { patience, factor, min_lr, min_delta, best: f64::INFINITY, wait: 0 }
    }

    /// Learning rate to use after an epoch that ended with validation MSE `val`.
    pub fn observe(&mut self, val: f64, lr: f64) -> f64 {
        if val < self.best - self.min_delta {
            self.best = val;
            self.wait = 0;
            return lr;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.wait = 0;
            return (lr * self.factor).max(self.min_lr);
        }
        lr
    }
}

/// Learning rate in force after each epoch of `val_curve`.
pub fn reduce_lr_on_plateau(val_curve: &[f64], lr: f64, patience: usize, factor: f64, min_lr: f64, min_delta: f64) -> Vec<f64> {
    let mut cb = ReduceLrOnPlateau::new(patience, factor, min_lr, min_delta);
    let mut lr = lr;
    val_curve
        .iter()
        .map(|&v| {
            lr = cb.observe(v, lr);
            lr
        })
        .collect()
}
