//! Writes hash embeddings for a synthetic corpus to a binary store, reopens
//! it, checks coverage and reads a few documents back.
//!
//! cargo run --example embedding_store -- --dim 512 --out /tmp/demo.emb

use std::path::PathBuf;

use clap::Parser;

use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
use hierdoc::embedstore::{verify, EmbeddingProvider, FileStore, HashEmbedder, StoreWriter};
use hierdoc::harness::chunk_corpus;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 512)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Store path; a temporary file when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args = Args::parse();
    let corpus = random_corpus(&SyntheticSpec { seed: args.seed, ..SyntheticSpec::default() });
    let docs = chunk_corpus(&corpus, 20, 64)?;
    let embedder = HashEmbedder::from_documents(args.dim, args.seed, None, &docs)?;

    let keep = args.out.is_some();
    let path = args.out.unwrap_or_else(|| std::env::temp_dir().join(format!("hierdoc_demo_{}.emb", std::process::id())));
    let layout = docs.iter().map(|d| (d.doc_id.clone(), d.n_chunks())).collect();
    let mut writer = StoreWriter::create(&path, args.dim, embedder.encoder_tag(), layout)?;
    for d in &docs {
        writer.write_doc(&embedder.lookup(&d.doc_id)?)?;
    }
    writer.finish()?;
    let bytes = std::fs::metadata(&path)?.len();
    println!("wrote {} documents to {} ({bytes} bytes)", docs.len(), path.display());

    let store = FileStore::open(&path)?;
    println!("dim {}, encoder {:?}, {} documents", store.dim(), store.encoder_tag(), store.len());
    let report = verify(&docs, &store)?;
    println!("verify: checked {}, missing {}, mismatched {}", report.checked, report.missing.len(), report.mismatched.len());

    for d in docs.iter().rev().take(3) {
        let stored = store.lookup(&d.doc_id)?;
        let fresh = embedder.lookup(&d.doc_id)?;
        let norm: f32 = stored.row(0).iter().map(|v| v * v).sum::<f32>().sqrt();
        println!(
            "{}: {} rows, first-row norm {norm:.4}, identical to recomputed {}",
            d.doc_id,
            stored.n_chunks(),
            stored == fresh
        );
    }
    if !keep {
        std::fs::remove_file(&path)?;
    }
    Ok(())
}
