//! Objective and the three-stage training procedure.
//!
//! Stage 1 fits everything end to end with fuzzy binning. Stage 2 binarizes
//! the masks, freezes the binning in hard mode and fine-tunes the extractor,
//! prototypes and head on the discretized inputs. Stage 3 replaces every
//! prototype with the nearest embedded part of a real training row and
//! fine-tunes the head alone.

mod loss;
mod optim;
mod stages;

use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use loss::{class_weights, loss_and_grads, loss_total, Inputs, LossBreakdown};
pub use optim::Adam;
pub use stages::{
    binarize_masks, count_unique_prototypes, discretize, init_model, project_prototypes, train, train_stage1,
    train_stage2, train_stage3, TrainOutcome,
};

use crate::error::{Error, Result};

/// Hyperparameters of a training run. Every field has a default, so a
/// partial config file is enough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Bins per continuous feature.
    pub bins: usize,
    /// Patching masks (parts).
    pub parts: usize,
    /// Embedding width; the extractor's hidden layer is twice as wide.
    pub hidden_dim: usize,
    pub n_prototypes: usize,
    pub lambda_sparsity: f64,
    pub lambda_diversity: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub epochs_stage3: usize,
    /// Epochs without validation-loss improvement before a stage stops.
    pub patience: usize,
    /// Share of every class held out for early stopping.
    pub validation_fraction: f64,
    /// Weight the cross-entropy by inverse class frequency.
    pub class_weighting: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            bins: 3,
            parts: 8,
            hidden_dim: 8,
            n_prototypes: 16,
            lambda_sparsity: 0.05,
            lambda_diversity: 0.01,
            learning_rate: 0.01,
            batch_size: 32,
            epochs_stage1: 500,
            epochs_stage2: 100,
            epochs_stage3: 50,
            patience: 20,
            validation_fraction: 0.2,
            class_weighting: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bins", self.bins),
            ("parts", self.parts),
            ("hidden_dim", self.hidden_dim),
            ("n_prototypes", self.n_prototypes),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".to_string()));
        }
        for (name, v) in [("lambda_sparsity", self.lambda_sparsity), ("lambda_diversity", self.lambda_diversity)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(alloc::format!("{name} must be non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig("validation_fraction must lie in [0, 1)".to_string()));
        }
        Ok(())
    }
}

/// One line of the per-epoch metrics log. Loss terms are means over the
/// epoch's training batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: u8,
    pub ce: f64,
    pub sparsity: f64,
    pub diversity: f64,
    pub total: f64,
    /// g-mean on the early-stopping holdout; NaN when a class is absent
    /// from it.
    pub val_gmean: f64,
}

pub type EpochLog = Vec<EpochRecord>;
