//! Runs the whole pipeline from a dataset CSV: writes a small labeled
//! corpus, a manifest and a run config to a directory, then trains and
//! evaluates with hash embeddings and lists the run artifacts.
//!
//! cargo run --release --example end_to_end -- --dir /tmp/hierdoc_run --model use_cnn

use std::fs;
use std::path::PathBuf;

use clap::Parser;
use rand::seq::IndexedRandom;
use rand::Rng;

use hierdoc::corpus::{write_records_file, CsvRecord, DatasetManifest, Split};
use hierdoc::harness::{run_experiment, EmbeddingSource, ExperimentConfig, TrainConfig};
use hierdoc::heads::HeadKind;
use hierdoc::rng::RngStreams;

#[derive(Parser)]
struct Args {
    /// Working directory; created if missing.
    #[arg(long, default_value = "target/end_to_end")]
    dir: PathBuf,
    #[arg(long, default_value = "flat_mean")]
    model: HeadKind,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const TOPICS: [(&str, &[&str]); 3] = [
    ("markets", &["shares", "profit", "investors", "bank", "rates", "growth", "trade", "stocks"]),
    ("sport", &["match", "goal", "season", "coach", "league", "players", "cup", "injury"]),
    ("tech", &["software", "phone", "users", "chip", "internet", "data", "network", "device"]),
];
const FILLER: [&str; 12] = ["the", "a", "and", "of", "to", "in", "said", "was", "on", "for", "new", "week"];

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    fs::create_dir_all(&args.dir)?;

    let mut rng = RngStreams::new(args.seed).stream("example/end_to_end");
    let mut records = Vec::new();
    for (label, words) in TOPICS {
        for i in 0..40 {
            let len = rng.random_range(30..400);
            let text: Vec<&str> = (0..len)
                .map(|_| if rng.random_bool(0.3) { *words.choose(&mut rng).unwrap() } else { *FILLER.choose(&mut rng).unwrap() })
                .collect();
            records.push(CsvRecord {
                doc_id: format!("{label}-{i:02}"),
                split: Split::Unsplit,
                label: label.to_owned(),
                text: format!("<p>{}.</p>", text.join(" ")),
            });
        }
    }
    write_records_file(&args.dir.join("news.csv"), &records)?;
    let manifest = DatasetManifest::new("news", &["markets", "sport", "tech"], 215);
    manifest.save(&args.dir.join("news.json"))?;

    let dim = args.model.input_dim().unwrap_or(256);
    let config = ExperimentConfig {
        train: TrainConfig { epochs: args.epochs, seed: args.seed, batch_size: 16, ..TrainConfig::new(args.model, "news") },
        data_path: "news.csv".into(),
        manifest_path: Some("news.json".into()),
        embeddings: EmbeddingSource::Hash { dim, seed: args.seed, class_signal: None },
        output_dir: "runs".into(),
        train_fraction: 0.75,
    };
    let config_path = args.dir.join("run.json");
    fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;

    let run = run_experiment(&ExperimentConfig::load(&config_path)?)?;
    for e in &run.report.epochs {
        println!(
            "epoch {:>2}  train loss {:.4}  train acc {:.3}  val acc {:.3}",
            e.epoch,
            e.train_loss,
            e.train_accuracy,
            e.val_accuracy.unwrap_or(f64::NAN)
        );
    }
    if let Some(m) = &run.metrics {
        println!("test accuracy {:.3} (best epoch {})", m.accuracy, run.report.best_epoch);
        for (name, c) in &m.per_class {
            println!("  {name:<8} precision {:.3} recall {:.3} support {}", c.precision, c.recall, c.support);
        }
    }
    println!("artifacts in {}:", run.run_dir.display());
    for entry in fs::read_dir(&run.run_dir)? {
        let entry = entry?;
        println!("  {} ({} bytes)", entry.file_name().to_string_lossy(), entry.metadata()?.len());
    }
    Ok(())
}
