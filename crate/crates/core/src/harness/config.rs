use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::chunker::DEFAULT_MAX_CHUNKS;
use crate::heads::HeadKind;

fn default_max_chunks() -> usize {
    DEFAULT_MAX_CHUNKS
}
fn default_batch_size() -> usize {
    32
}
fn default_epochs() -> usize {
    30
}
fn default_lr() -> f64 {
    1e-3
}
fn default_patience() -> usize {
    5
}
fn default_val_fraction() -> f64 {
    0.1
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model_name: HeadKind,
    pub dataset_name: String,
    /// Words per chunk; the dataset manifest's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<usize>,
    #[serde(default = "default_max_chunks")]
    pub max_chunks: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[serde(default = "default_patience")]
    pub early_stop_patience: usize,
    /// Share of each training class held out for validation; 0 disables.
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
}

impl TrainConfig {
    pub fn new(model_name: HeadKind, dataset_name: impl Into<String>) -> Self {
        Self {
            model_name,
            dataset_name: dataset_name.into(),
            chunk_size: None,
            max_chunks: default_max_chunks(),
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            lr: default_lr(),
            seed: 0,
            early_stop_patience: default_patience(),
            val_fraction: default_val_fraction(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..0.5).contains(&self.val_fraction) {
            return bad("val_fraction must be in [0, 0.5)");
        }
        if self.max_chunks == 0 {
            return bad("max_chunks must be >= 1");
        }
        if matches!(self.chunk_size, Some(c) if c == 0) {
            return bad("chunk_size must be >= 1");
        }
        Ok(())
    }
}

/// Where chunk embeddings come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSource {
    /// A binary embedding store file.
    Store { path: PathBuf },
    /// Deterministic hash embeddings computed on the fly.
    Hash {
        dim: usize,
        #[serde(default)]
        seed: u64,
        /// Adds this much to the coordinate of each document's label.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class_signal: Option<f32>,
    },
}

fn default_train_fraction() -> f64 {
    0.8
}

/// A [`TrainConfig`] plus the inputs and outputs of an end-to-end run.
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Canonical dataset CSV.
    pub data_path: PathBuf,
    /// Manifest JSON; a built-in manifest named `dataset_name` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_path: Option<PathBuf>,
    pub embeddings: EmbeddingSource,
    pub output_dir: PathBuf,
    /// Train share for datasets without a canonical split.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data_path);
        fix(&mut self.output_dir);
        if let Some(m) = &mut self.manifest_path {
            fix(m);
        }
        if let EmbeddingSource::Store { path } = &mut self.embeddings {
            fix(path);
        }
    }
}
