use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Skip-gram with negative sampling hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    /// Negative samples per positive pair.
    pub negatives: usize,
    /// Subsampling threshold; `None` disables subsampling.
    pub subsample: Option<f64>,
    pub learning_rate: f64,
    /// Learning rate floor reached by the linear decay.
    pub min_learning_rate: f64,
    /// Sample each position's window uniformly from `1..=window`.
    pub shrink_window: bool,
    pub seed: u64,
    pub workers: usize,
    /// Single worker, bit-identical output for equal seeds.
    pub deterministic: bool,
    /// Keep `<unk>` as a trainable token, a negative sample, and a row of the
    /// emitted space.
    pub include_unk: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            window: 5,
            epochs: 5,
            negatives: 5,
            subsample: Some(1e-5),
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            shrink_window: true,
            seed: 42,
            workers: 1,
            deterministic: true,
            include_unk: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1");
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0 && t < 1.0) {
                return fail("subsample threshold must lie in (0, 1)");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if !(self.min_learning_rate >= 0.0 && self.min_learning_rate <= self.learning_rate) {
            return fail("min learning rate must lie in [0, learning_rate]");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        Ok(())
    }

    /// Worker count actually used.
    pub fn effective_workers(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.workers
        }
    }
}
