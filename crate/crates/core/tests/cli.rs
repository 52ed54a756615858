use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hierdoc::corpus::read_records_file;
use hierdoc::harness::Metrics;

fn hierdoc(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_hierdoc")).current_dir(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "hierdoc {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const MANIFEST: &str = r#"{
  "name": "toy", "num_classes": 3, "class_names": ["cats", "dogs", "fish"],
  "avg_words": 30, "default_chunk_size": 20, "canonical_split": true
}"#;

fn write_dataset(dir: &Path) {
    let words = [["meow", "purr", "whisker"], ["bark", "fetch", "leash"], ["fin", "gill", "reef"]];
    let mut csv = String::from("doc_id,split,label,text\n");
    for (c, name) in ["cats", "dogs", "fish"].iter().enumerate() {
        for i in 0..8 {
            let split = if i < 6 { "train" } else { "test" };
            let body: Vec<String> = (0..12 + 3 * i).map(|k| format!("{} w{}", words[c][k % 3], (k * 7 + c) % 5)).collect();
            csv.push_str(&format!("{name}{i},{split},{name},\"<p>It's {}!</p>\"\n", body.join(" ")));
        }
    }
    fs::write(dir.join("toy.csv"), csv).unwrap();
    fs::write(dir.join("toy.json"), MANIFEST).unwrap();
}

#[test]
fn pipeline_from_raw_csv_to_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_dataset(dir);

    hierdoc(dir, &["preprocess", "--in", "toy.csv", "--out", "clean.csv"]);
    let clean = read_records_file(&dir.join("clean.csv")).unwrap();
    assert_eq!(clean.len(), 24);
    assert!(clean[0].text.starts_with("it is meow"), "{:?}", clean[0].text);
    assert_eq!((clean[0].doc_id.as_str(), clean[0].label.as_str()), ("cats0", "cats"));

    hierdoc(dir, &["chunk", "--in", "clean.csv", "--manifest", "toy.json", "--max-chunks", "2", "--out", "chunks.jsonl"]);
    let lines: Vec<serde_json::Value> =
        fs::read_to_string(dir.join("chunks.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 24);
    assert_eq!(lines[8]["label"], 1);
    assert!(lines.iter().all(|l| l["chunks"].as_array().unwrap().len() <= 2));
    assert!(lines.iter().any(|l| l["truncated"] == true));

    hierdoc(dir, &["embed", "hash", "--chunks", "chunks.jsonl", "--dim", "32", "--seed", "3", "--out", "toy.emb"]);
    let verified = hierdoc(dir, &["embed", "verify", "--chunks", "chunks.jsonl", "--store", "toy.emb"]);
    assert!(String::from_utf8_lossy(&verified.stdout).starts_with("checked 24, missing 0, mismatched 0"));

    let config = r#"{
      "model_name": "flat_mean", "dataset_name": "toy", "chunk_size": 20, "max_chunks": 2,
      "epochs": 5, "batch_size": 4, "val_fraction": 0.0, "seed": 1,
      "data_path": "toy.csv", "manifest_path": "toy.json",
      "embeddings": {"kind": "store", "path": "toy.emb"}, "output_dir": "runs"
    }"#;
    fs::write(dir.join("run.json"), config).unwrap();
    hierdoc(dir, &["train", "--config", "run.json"]);
    let run_dir = dir.join("runs/flat_mean_toy_s1");
    for f in ["config.json", "report.json", "metrics.json", "predictions.csv", "model.ckpt"] {
        assert!(run_dir.join(f).is_file(), "{f} missing");
    }
    let saved: Metrics = serde_json::from_str(&fs::read_to_string(run_dir.join("metrics.json")).unwrap()).unwrap();

    let eval = hierdoc(dir, &["eval", "--config", "run.json", "--predictions", "again.csv"]);
    let fresh: Metrics = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(fresh, saved);
    assert_eq!(fs::read(dir.join("again.csv")).unwrap(), fs::read(run_dir.join("predictions.csv")).unwrap());

    let table = hierdoc(dir, &["table", "runs/flat_mean_toy_s1"]);
    let table = String::from_utf8(table.stdout).unwrap();
    let row = table.lines().find(|l| l.contains("flat_mean") || l.contains("Flat")).expect("a row for the run");
    assert!(row.contains(&format!("{:.2}", saved.accuracy * 100.0)), "{table}");
}

#[test]
fn verify_fails_on_a_store_for_other_chunks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_dataset(dir);
    hierdoc(dir, &["chunk", "--in", "toy.csv", "--manifest", "toy.json", "--out", "a.jsonl"]);
    hierdoc(dir, &["chunk", "--in", "toy.csv", "--manifest", "toy.json", "--chunk-size", "30", "--out", "b.jsonl"]);
    hierdoc(dir, &["embed", "hash", "--chunks", "a.jsonl", "--dim", "8", "--out", "a.emb"]);
    let out = Command::new(env!("CARGO_BIN_EXE_hierdoc"))
        .current_dir(dir)
        .args(["embed", "verify", "--chunks", "b.jsonl", "--store", "a.emb"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("mismatch cats0"));
}

#[test]
fn reference_only_table_has_the_published_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hierdoc(tmp.path(), &["table", "--reference-only"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("| Model |"));
    assert!(text.contains("98.43"));
    assert!(text.contains("81.76"));
}
