//! Chunks a dataset CSV (or a synthetic corpus) and prints chunk-count
//! statistics. Optionally writes `chunks.jsonl`.
//!
//! cargo run --example chunk_documents -- --csv data/bbc.csv --manifest bbc_news --out chunks.jsonl

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;

use hierdoc::chunker::{choose_chunk_size, write_jsonl_file, DEFAULT_MAX_CHUNKS};
use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
use hierdoc::corpus::{load_dataset, DatasetManifest};
use hierdoc::harness::chunk_corpus;

#[derive(Parser)]
struct Args {
    /// Dataset CSV (`doc_id,split,label,text`); a synthetic corpus when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Built-in dataset name or manifest path, required with --csv.
    #[arg(long)]
    manifest: Option<String>,
    /// Words per chunk; chosen from the average document length when absent.
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_CHUNKS)]
    max_chunks: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args = Args::parse();
    let corpus = match (&args.csv, &args.manifest) {
        (Some(csv), Some(m)) => {
            let manifest = match DatasetManifest::builtin(m) {
                Some(b) => b,
                None => DatasetManifest::load(m.as_ref())?,
            };
            load_dataset(&manifest, csv)?
        }
        (Some(_), None) => anyhow::bail!("--csv needs --manifest"),
        _ => random_corpus(&SyntheticSpec { max_words: 600, ..SyntheticSpec::default() }),
    };
    let stats = corpus.stats()?;
    let chunk_size = args.chunk_size.unwrap_or_else(|| choose_chunk_size(stats.avg_words));
    println!(
        "{}: {} documents, {:.1} words on average (max {}), chunk size {chunk_size}",
        corpus.manifest.name,
        corpus.len(),
        stats.avg_words,
        stats.max_words
    );

    let docs = chunk_corpus(&corpus, chunk_size, args.max_chunks)?;
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for d in &docs {
        *histogram.entry(d.n_chunks()).or_default() += 1;
    }
    println!("chunks  documents");
    for (n, count) in &histogram {
        println!("{n:>6}  {count}");
    }
    let truncated = docs.iter().filter(|d| d.truncated).count();
    println!("{truncated} documents truncated at {} chunks", args.max_chunks);
    if let Some(first) = docs.first() {
        println!("first chunk of {}: {}", first.doc_id, first.chunks[0].join());
    }
    if let Some(out) = &args.out {
        write_jsonl_file(out, &docs)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
