//! Trains heads on a synthetic corpus whose hash embeddings carry a
//! per-class signal, then prints test accuracy for each.
//!
//! cargo run --release --example train_synthetic -- --epsilon 0.5 --models flat_mean,bert_cnn

use clap::Parser;

use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
use hierdoc::embedstore::{ClassSignal, HashEmbedder};
use hierdoc::harness::{chunk_corpus, train, TrainConfig};
use hierdoc::heads::HeadKind;

#[derive(Parser)]
struct Args {
    /// Comma-separated head names.
    #[arg(long, value_delimiter = ',', default_value = "flat_mean,use_lstm,use_cnn,bert_lstm,bert_cnn")]
    models: Vec<HeadKind>,
    /// Class-signal strength added to every chunk vector.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f32,
    #[arg(long, default_value_t = 200)]
    train_docs: usize,
    #[arg(long, default_value_t = 100)]
    test_docs: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let args = Args::parse();
    let corpus = random_corpus(&SyntheticSpec {
        n_train: args.train_docs,
        n_test: args.test_docs,
        num_classes: args.classes,
        seed: args.seed,
        ..SyntheticSpec::default()
    });
    let docs = chunk_corpus(&corpus, 20, 64)?;
    println!("{} documents, {} chunks", docs.len(), docs.iter().map(|d| d.n_chunks()).sum::<usize>());

    for kind in args.models {
        let dim = kind.input_dim().unwrap_or(512);
        let provider = HashEmbedder::from_documents(dim, args.seed, Some(ClassSignal { epsilon: args.epsilon }), &docs)?;
        let config = TrainConfig { epochs: args.epochs, seed: args.seed, ..TrainConfig::new(kind, "synthetic") };
        let outcome = train(&config, &corpus, &provider)?;
        let r = &outcome.report;
        let acc = r.test_metrics.as_ref().map_or(f64::NAN, |m| m.accuracy);
        println!(
            "{kind:<10} test acc {acc:.3}  epochs {:>2} (best {:>2})  final train loss {:.4}  {:.1}s",
            r.epochs.len(),
            r.best_epoch,
            r.epochs.last().map_or(f64::NAN, |e| e.train_loss),
            r.wall_seconds
        );
    }
    Ok(())
}
