use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hierdoc::chunker::{read_jsonl_file, write_jsonl_file, DEFAULT_MAX_CHUNKS};
use hierdoc::corpus::{read_records_file, write_records_file, Corpus, DatasetManifest};
use hierdoc::embedstore::{verify, write_store, EmbeddingProvider, FileStore, HashEmbedder};
use hierdoc::harness::{
    chunk_corpus, emit_reference_table, emit_table, evaluate_checkpoint, run_experiment, write_predictions_csv,
    ExperimentConfig, ReferenceTable, TrainReport,
};
use hierdoc::textprep::preprocess;

#[derive(Parser)]
#[command(name = "hierdoc", version, about = "Chunk-level long-document classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean the text column of a dataset CSV.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split cleaned documents into fixed-size word chunks (JSONL).
    Chunk {
        #[arg(long = "in")]
        input: PathBuf,
        /// Built-in dataset name or manifest JSON path.
        #[arg(long)]
        manifest: String,
        /// Words per chunk; the manifest default when absent.
        #[arg(long)]
        chunk_size: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_CHUNKS)]
        max_chunks: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embedding store utilities.
    Embed {
        #[command(subcommand)]
        command: EmbedCommand,
    },
    /// Train and evaluate one model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a saved model on the test split of a run config.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the checkpoint of the config's run directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write per-document predictions here.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Print the accuracy table for finished runs.
    Table {
        /// Run directories or report.json files.
        runs: Vec<PathBuf>,
        /// Reference accuracies; the bundled table when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Print only the reference grid.
        #[arg(long)]
        reference_only: bool,
    },
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Check that a store has one row per chunk for every document.
    Verify {
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
    /// Write a store of deterministic hash embeddings.
    Hash {
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long, default_value_t = 512)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_manifest(spec: &str) -> Result<DatasetManifest> {
    if let Some(m) = DatasetManifest::builtin(spec) {
        return Ok(m);
    }
    DatasetManifest::load(Path::new(spec)).with_context(|| format!("manifest {spec:?} is neither built in nor a readable file"))
}

fn load_report(path: &Path) -> Result<TrainReport> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_owned() };
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Preprocess { input, out } => {
            let mut records = read_records_file(&input)?;
            for r in &mut records {
                r.text = preprocess(&r.text).into_string();
            }
            write_records_file(&out, &records)?;
            eprintln!("{} records -> {}", records.len(), out.display());
        }
        Command::Chunk { input, manifest, chunk_size, max_chunks, out } => {
            let manifest = load_manifest(&manifest)?;
            let chunk_size = chunk_size.unwrap_or(manifest.default_chunk_size);
            let corpus = Corpus::from_records(manifest, read_records_file(&input)?)?;
            let docs = chunk_corpus(&corpus, chunk_size, max_chunks)?;
            write_jsonl_file(&out, &docs)?;
            let truncated = docs.iter().filter(|d| d.truncated).count();
            eprintln!("{} documents, {truncated} truncated -> {}", docs.len(), out.display());
        }
        Command::Embed { command: EmbedCommand::Verify { chunks, store } } => {
            let docs = read_jsonl_file(&chunks)?;
            let store = FileStore::open(&store)?;
            let report = verify(&docs, &store)?;
            println!(
                "checked {}, missing {}, mismatched {} (dim {}, encoder {})",
                report.checked,
                report.missing.len(),
                report.mismatched.len(),
                store.dim(),
                store.encoder_tag()
            );
            for id in report.missing.iter().take(10) {
                println!("missing {id}");
            }
            for (id, want, got) in report.mismatched.iter().take(10) {
                println!("mismatch {id}: {want} chunks, {got} rows");
            }
            if !report.is_ok() {
                bail!("store does not cover the chunk file");
            }
        }
        Command::Embed { command: EmbedCommand::Hash { chunks, dim, seed, out } } => {
            let docs = read_jsonl_file(&chunks)?;
            let embedder = HashEmbedder::from_documents(dim, seed, None, &docs)?;
            let entries = docs.iter().map(|d| embedder.lookup(&d.doc_id)).collect::<Result<Vec<_>, _>>()?;
            write_store(&entries, dim, embedder.encoder_tag(), &out)?;
            eprintln!("{} documents, dim {dim} -> {}", entries.len(), out.display());
        }
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let run = run_experiment(&cfg)?;
            let r = &run.report;
            println!(
                "{} on {}: {} epochs, best {}, {:.1}s",
                r.config.model_name,
                r.config.dataset_name,
                r.epochs.len(),
                r.best_epoch,
                r.wall_seconds
            );
            if let Some(m) = &run.metrics {
                println!("test accuracy {:.4}, loss {:.4}", m.accuracy, m.loss);
            }
            println!("artifacts in {}", run.run_dir.display());
        }
        Command::Eval { config, checkpoint, predictions } => {
            let cfg = ExperimentConfig::load(&config)?;
            let tc = &cfg.train;
            let checkpoint = checkpoint.unwrap_or_else(|| {
                cfg.output_dir.join(format!("{}_{}_s{}", tc.model_name, tc.dataset_name, tc.seed)).join("model.ckpt")
            });
            let (metrics, preds) = evaluate_checkpoint(&cfg, &checkpoint)?;
            if let Some(path) = predictions {
                // Manifests keep class names sorted, so key order is label order.
                let class_names: Vec<String> = metrics.per_class.keys().cloned().collect();
                write_predictions_csv(BufWriter::new(File::create(&path)?), &preds, &class_names)?;
            }
            println!("{}", serde_json::to_string_pretty(&metrics)?);
        }
        Command::Table { runs, reference, reference_only } => {
            let reference = match reference {
                Some(p) => ReferenceTable::load(&p)?,
                None => ReferenceTable::builtin(),
            };
            if reference_only {
                print!("{}", emit_reference_table(&reference));
            } else {
                let reports = runs.iter().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
                print!("{}", emit_table(&reports, &reference));
            }
        }
    }
    Ok(())
}
