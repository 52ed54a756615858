use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::config::{EmbeddingSource, ExperimentConfig};
use super::metrics::{evaluate, write_predictions_csv, Metrics, Prediction};
use super::train::{load_examples, train, TrainReport};
use super::HarnessError;
use crate::chunker::{ChunkError, ChunkedDocument};
use crate::corpus::{load_dataset, stratified_split, Corpus, DatasetManifest, Split};
use crate::embedstore::{verify, ClassSignal, EmbeddingProvider, FileStore, HashEmbedder};
use crate::heads::HeadModel;
use crate::textprep::{preprocess, tokenize};

/// Cleans, tokenizes and chunks every document of `corpus`. Documents that
/// are empty after preprocessing are skipped with a warning.
pub fn chunk_corpus(corpus: &Corpus, chunk_size: usize, max_chunks: usize) -> Result<Vec<ChunkedDocument>, ChunkError> {
    let mut out = Vec::with_capacity(corpus.len());
    for d in &corpus.documents {
        let tokens = tokenize(&preprocess(&d.raw_text));
        if tokens.is_empty() {
            log::warn!("dropping {:?}: no tokens after preprocessing", d.doc_id);
            continue;
        }
        out.push(ChunkedDocument::from_tokens(d.doc_id.clone(), d.label_id, d.split, &tokens, chunk_size, max_chunks)?);
    }
    Ok(out)
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run_dir: PathBuf,
    pub report: TrainReport,
    pub metrics: Option<Metrics>,
    pub predictions_path: Option<PathBuf>,
    pub checkpoint_path: PathBuf,
}

fn write_json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

/// A corpus ready for training: split, chunked, and with every document
/// covered by the embedding provider.
pub struct PreparedData {
    pub corpus: Corpus,
    pub docs: Vec<ChunkedDocument>,
    pub provider: Box<dyn EmbeddingProvider>,
}

/// Load, split (when the dataset has no test split), preprocess, chunk and
/// check embedding coverage.
pub fn prepare_experiment(config: &ExperimentConfig) -> Result<PreparedData, HarnessError> {
    let tc = &config.train;
    tc.validate()?;
    let manifest = match &config.manifest_path {
        Some(p) => DatasetManifest::load(p)?,
        None => DatasetManifest::builtin(&tc.dataset_name)
            .ok_or_else(|| HarnessError::Config(format!("no built-in manifest for {:?}; set manifest_path", tc.dataset_name)))?,
    };
    let mut corpus = load_dataset(&manifest, &config.data_path)?;
    if corpus.split_count(Split::Test) == 0 {
        corpus = stratified_split(&corpus, config.train_fraction, tc.seed)?;
    }
    let chunk_size = tc.chunk_size.unwrap_or(manifest.default_chunk_size);
    let docs = chunk_corpus(&corpus, chunk_size, tc.max_chunks)?;
    if docs.len() < corpus.len() {
        let kept: HashSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        corpus.documents.retain(|d| kept.contains(d.doc_id.as_str()));
    }

    let provider: Box<dyn EmbeddingProvider> = match &config.embeddings {
        EmbeddingSource::Store { path } => Box::new(FileStore::open(path)?),
        EmbeddingSource::Hash { dim, seed, class_signal } => {
            let signal = class_signal.map(|epsilon| ClassSignal { epsilon });
            Box::new(HashEmbedder::from_documents(*dim, *seed, signal, &docs)?)
        }
    };
    let check = verify(&docs, provider.as_ref())?;
    if !check.is_ok() {
        return Err(HarnessError::Verify { missing: check.missing.len(), mismatched: check.mismatched.len() });
    }
    log::info!(
        "{}: {} train / {} test documents, chunk size {chunk_size}, encoder {}",
        manifest.name,
        corpus.split_count(Split::Train),
        corpus.split_count(Split::Test),
        provider.encoder_tag()
    );
    Ok(PreparedData { corpus, docs, provider })
}

/// Runs [`prepare_experiment`], then trains and evaluates. Artifacts go to
/// `output_dir/{model}_{dataset}_s{seed}/`: `config.json`, `report.json`,
/// `metrics.json`, `predictions.csv` and `model.ckpt`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    let tc = &config.train;
    let PreparedData { corpus, provider, .. } = prepare_experiment(config)?;

    let run_dir = config.output_dir.join(format!("{}_{}_s{}", tc.model_name, tc.dataset_name, tc.seed));
    fs::create_dir_all(&run_dir)?;
    write_json(run_dir.join("config.json"), config)?;

    let mut outcome = train(tc, &corpus, provider.as_ref())?;
    let checkpoint_path = run_dir.join("model.ckpt");
    outcome.model.save(&checkpoint_path)?;
    outcome.report.checkpoint_path = Some(checkpoint_path.clone());

    let metrics = outcome.report.test_metrics.clone();
    let predictions_path = if let Some(m) = &metrics {
        write_json(run_dir.join("metrics.json"), m)?;
        let path = run_dir.join("predictions.csv");
        write_predictions_csv(BufWriter::new(File::create(&path)?), &outcome.test_predictions, &corpus.manifest.class_names)?;
        Some(path)
    } else {
        None
    };
    write_json(run_dir.join("report.json"), &outcome.report)?;
    Ok(RunArtifacts { run_dir, report: outcome.report, metrics, predictions_path, checkpoint_path })
}

/// Test-split metrics and predictions of a saved model under `config`'s data
/// pipeline.
pub fn evaluate_checkpoint(config: &ExperimentConfig, checkpoint: &Path) -> Result<(Metrics, Vec<Prediction>), HarnessError> {
    let data = prepare_experiment(config)?;
    let model = HeadModel::load(checkpoint)?;
    let test = load_examples(&data.corpus, Split::Test, data.provider.as_ref(), config.train.max_chunks)?;
    if test.is_empty() {
        return Err(HarnessError::EmptySplit("test"));
    }
    evaluate(&model, &test, &data.corpus.manifest.class_names, config.train.batch_size)
}
