//! Prints the published accuracy grid, then trains every head on a
//! synthetic corpus and prints the comparison table with that run added.
//!
//! cargo run --release --example reproduce_table -- --epochs 10

use clap::Parser;

use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
use hierdoc::embedstore::{ClassSignal, HashEmbedder};
use hierdoc::harness::{chunk_corpus, emit_reference_table, emit_table, train, ReferenceTable, TrainConfig};
use hierdoc::heads::HeadKind;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args = Args::parse();
    let reference = ReferenceTable::builtin();
    println!("Reference accuracies (%):\n\n{}", emit_reference_table(&reference));

    let corpus = random_corpus(&SyntheticSpec { seed: args.seed, ..SyntheticSpec::default() });
    let docs = chunk_corpus(&corpus, 20, 64)?;
    let mut reports = Vec::new();
    for kind in HeadKind::ALL {
        let dim = kind.input_dim().unwrap_or(512);
        let provider = HashEmbedder::from_documents(dim, args.seed, Some(ClassSignal { epsilon: args.epsilon }), &docs)?;
        let config = TrainConfig { epochs: args.epochs, seed: args.seed, ..TrainConfig::new(kind, "synthetic") };
        reports.push(train(&config, &corpus, &provider)?.report);
    }
    println!("With a synthetic run:\n\n{}", emit_table(&reports, &reference));
    Ok(())
}
