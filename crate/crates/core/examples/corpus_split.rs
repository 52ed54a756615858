//! Lists the built-in dataset manifests and shows a stratified train/test
//! split of a synthetic corpus.
//!
//! cargo run --example corpus_split -- --fraction 0.8 --seed 3

use clap::Parser;

use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
use hierdoc::corpus::{stratified_split, DatasetManifest, Split};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 103)]
    docs: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    println!("{:<11} {:>7} {:>9} {:>10} {:>6}  split", "dataset", "classes", "avg words", "chunk size", "docs");
    for name in DatasetManifest::builtin_names() {
        let m = DatasetManifest::builtin(name).expect("listed manifest exists");
        let docs = m.train_count.zip(m.test_count).map_or_else(|| "-".to_owned(), |(a, b)| (a + b).to_string());
        let split = if m.canonical_split { "canonical" } else { "stratified" };
        println!("{name:<11} {:>7} {:>9} {:>10} {docs:>6}  {split}", m.num_classes, m.avg_words, m.default_chunk_size);
    }

    let corpus = random_corpus(&SyntheticSpec {
        n_train: args.docs,
        n_test: 0,
        num_classes: args.classes,
        seed: args.seed,
        ..SyntheticSpec::default()
    });
    let split = stratified_split(&corpus, args.fraction, args.seed)?;
    println!("\n{} documents split {:.0}/{:.0}:", split.len(), args.fraction * 100.0, (1.0 - args.fraction) * 100.0);
    println!("{:<8} {:>5} {:>5}", "class", "train", "test");
    for (id, name) in split.manifest.class_names.iter().enumerate() {
        let count = |s: Split| split.split(s).filter(|d| d.label_id == id).count();
        println!("{name:<8} {:>5} {:>5}", count(Split::Train), count(Split::Test));
    }
    println!("{:<8} {:>5} {:>5}", "total", split.split_count(Split::Train), split.split_count(Split::Test));
    Ok(())
}
