//! Multi-task training: masked mean cross-entropy combined across present
//! tasks, a Bernoulli(γ) interleave of unlabeled batches, and an epoch
//! runner that checkpoints by held-out chunk F1.

pub mod epoch;
pub mod loss;
pub mod run;

pub use epoch::{train_epoch, train_step, UnlabeledCycle};
pub use loss::{combined_loss, task_loss, TaskLosses};
pub use run::{evaluate_model, run_training, split_held_out, subsample_labeled, RunSummary};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::model::{CheckpointError, ModelKind};

/// Everything a training run needs beyond the corpora themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: ModelKind,
    pub semi_supervised: bool,
    /// Probability of interleaving one unlabeled batch before a labeled one.
    pub gamma: f64,
    pub epochs: usize,
    /// Rows per batch.
    pub batch_size: usize,
    /// Tokens per row; longer sentences split into segments.
    pub max_len: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Sentence-level fraction of the labeled corpus to train on.
    pub labeled_fraction: f64,
    pub d_w: usize,
    pub d_h: usize,
    pub d_lab: usize,
    /// LM softmax width cap; the effective width is min(cap, vocabulary).
    pub lm_vocab_cap: usize,
    /// Words below this count map to UNK when building the vocabulary.
    pub min_frequency: u64,
    pub pretrained: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: ModelKind::Hier,
            semi_supervised: false,
            gamma: 0.5,
            epochs: 100,
            batch_size: 32,
            max_len: 32,
            learning_rate: 1e-3,
            seed: 1,
            labeled_fraction: 1.0,
            d_w: 50,
            d_h: 100,
            d_lab: 16,
            lm_vocab_cap: 10_000,
            min_frequency: 1,
            pretrained: None,
        }
    }
}

impl TrainConfig {
    /// Reject configurations that violate the training contract. Returns
    /// human-readable messages suitable for usage errors.
    pub fn validate(&self) -> Result<(), String> {
        if self.semi_supervised && !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!(
                "gamma must lie strictly between 0 and 1 when semi-supervised, got {}",
                self.gamma
            ));
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction <= 1.0) {
            return Err(format!(
                "labeled-fraction must lie in (0, 1], got {}",
                self.labeled_fraction
            ));
        }
        if self.epochs == 0 {
            return Err("epochs must be at least 1".into());
        }
        if self.batch_size == 0 || self.max_len == 0 {
            return Err(format!(
                "batch geometry must be at least 1x1, got {}x{}",
                self.batch_size, self.max_len
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, v) in [("d_w", self.d_w), ("d_h", self.d_h), ("d_lab", self.d_lab)] {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if self.lm_vocab_cap < 2 {
            return Err(format!("lm-vocab-cap must be at least 2, got {}", self.lm_vocab_cap));
        }
        Ok(())
    }
}

/// One epoch's summary. Loss fields are means over the batches where the
/// task was present; `None` when no such batch occurred. Wall-clock time
/// is informational and excluded from the serialized history so reruns of
/// the same seed produce byte-identical files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub pos_loss: Option<f64>,
    pub chunk_loss: Option<f64>,
    pub lm_loss: Option<f64>,
    pub dev_pos_accuracy: f64,
    pub dev_chunk_f1: f64,
    pub labeled_batches: usize,
    pub unlabeled_batches: usize,
    /// Mean gradient norm the POS head received from unlabeled batches;
    /// the observable trace of LM error flowing through junior tasks.
    pub unlabeled_pos_grad_norm: Option<f64>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite loss at {kind} batch {index} of epoch {epoch}")]
    NonFiniteLoss { kind: &'static str, index: usize, epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
