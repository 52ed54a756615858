//! Training, evaluation and result tables.

mod config;
mod experiment;
mod metrics;
mod table;
mod train;

pub use config::{EmbeddingSource, ExperimentConfig, TrainConfig};
pub use experiment::{chunk_corpus, evaluate_checkpoint, prepare_experiment, run_experiment, PreparedData, RunArtifacts};
pub use metrics::{
    evaluate, metrics_from_predictions, predict, read_predictions_csv, write_predictions_csv, ClassMetrics, Metrics,
    Prediction,
};
pub use table::{emit_reference_table, emit_table, ReferenceEntry, ReferenceTable};
pub use train::{load_examples, make_batches, train, EpochStats, Example, TrainOutcome, TrainReport, Trainer};

use crate::chunker::ChunkError;
use crate::corpus::CorpusError;
use crate::embedstore::EmbedError;
use crate::neural::NeuralError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("class {0:?} has no training documents")]
    EmptyClass(String),
    #[error("embedding dim {got} does not match model input {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embeddings do not match chunks: {missing} missing, {mismatched} with wrong row counts")]
    Verify { missing: usize, mismatched: usize },
    #[error("no documents in the {0} split")]
    EmptySplit(&'static str),
}
