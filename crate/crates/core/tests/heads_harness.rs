use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use hierdoc::corpus::synthetic::{random_corpus, SyntheticSpec};
use hierdoc::corpus::Split;
use hierdoc::embedstore::{ClassSignal, DocEmbedding, HashEmbedder};
use hierdoc::harness::{
    chunk_corpus, emit_reference_table, evaluate, load_examples, make_batches, read_predictions_csv, run_experiment,
    train, EmbeddingSource, ExperimentConfig, HarnessError, ReferenceTable, Trainer,
};
use hierdoc::heads::{
    build_bert_cnn, build_bert_lstm, build_flat_mean, build_use_cnn, build_use_lstm, pad_batch, HeadKind, HeadModel,
};
use hierdoc::neural::Layer;
use hierdoc::rng::RngStreams;
use hierdoc::{Corpus, TrainConfig};

fn random_docs(n: usize, lengths: &[usize], dim: usize, seed: u64) -> Vec<DocEmbedding> {
    let mut rng = RngStreams::new(seed).stream("test/docs");
    (0..n)
        .map(|i| {
            let rows = lengths[i % lengths.len()];
            let data: Vec<f32> = (0..rows * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            DocEmbedding::new(format!("d{i}"), dim, data).unwrap()
        })
        .collect()
}

fn logits(model: &HeadModel, docs: &[DocEmbedding]) -> Vec<f32> {
    let refs: Vec<&DocEmbedding> = docs.iter().collect();
    model.logits(&pad_batch(&refs).unwrap()).unwrap().into_data()
}

#[test]
fn head_output_shapes_and_single_chunk_inputs() {
    let cases: Vec<(HeadModel, usize, usize, usize)> = vec![
        (build_use_lstm(5, 0).unwrap(), 3, 7, 512),
        (build_use_cnn(5, 0).unwrap(), 2, 8, 512),
        (build_bert_lstm(5, 0).unwrap(), 4, 10, 768),
        (build_bert_cnn(5, 0).unwrap(), 2, 6, 768),
        (build_flat_mean(64, 5, 0).unwrap(), 3, 4, 64),
    ];
    for (model, b, t, dim) in cases {
        let out = logits(&model, &random_docs(b, &[t], dim, 1));
        assert_eq!(out.len(), b * 5, "{}", model.kind);
        let single = logits(&model, &random_docs(2, &[1], dim, 2));
        assert_eq!(single.len(), 10, "{}", model.kind);
        assert!(single.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn bert_cnn_depends_on_chunk_order_and_flat_mean_does_not() {
    let doc = &random_docs(1, &[6], 768, 3)[0];
    let mut rows: Vec<Vec<f32>> = (0..6).map(|i| doc.row(i).to_vec()).collect();
    rows.reverse();
    rows.swap(0, 3);
    let permuted = DocEmbedding::from_rows("p", &rows).unwrap();

    let cnn = build_bert_cnn(4, 0).unwrap();
    let a = logits(&cnn, std::slice::from_ref(doc));
    let b = logits(&cnn, std::slice::from_ref(&permuted));
    assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-4), "{a:?} vs {b:?}");

    let flat = build_flat_mean(768, 4, 0).unwrap();
    let a = logits(&flat, std::slice::from_ref(doc));
    let b = logits(&flat, std::slice::from_ref(&permuted));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-5));
}

#[test]
fn flat_mean_on_one_chunk_is_the_dense_layer_of_that_chunk() {
    let model = build_flat_mean(16, 3, 4).unwrap();
    let doc = &random_docs(1, &[1], 16, 5)[0];
    let Layer::Dense(dense) = &model.network.layers()[1] else { panic!("dense layer expected") };
    let (w, bias) = (dense.weight.value.data(), dense.bias.value.data());
    let want: Vec<f64> = (0..3)
        .map(|k| f64::from(bias[k]) + (0..16).map(|i| f64::from(doc.row(0)[i]) * f64::from(w[i * 3 + k])).sum::<f64>())
        .collect();
    let got = logits(&model, std::slice::from_ref(doc));
    for (g, w) in got.iter().zip(&want) {
        assert!((f64::from(*g) - w).abs() < 1e-5);
    }
}

fn synthetic(n_train: usize, n_test: usize, seed: u64) -> Corpus {
    random_corpus(&SyntheticSpec { n_train, n_test, seed, ..SyntheticSpec::default() })
}

fn provider(corpus: &Corpus, dim: usize, epsilon: f32) -> HashEmbedder {
    let docs = chunk_corpus(corpus, 20, 64).unwrap();
    HashEmbedder::from_documents(dim, 0, Some(ClassSignal { epsilon }), &docs).unwrap()
}

#[test]
fn checkpoint_round_trip_gives_bitwise_logits() {
    let corpus = synthetic(48, 16, 2);
    let dir = tempfile::tempdir().unwrap();
    for kind in HeadKind::ALL {
        let dim = kind.input_dim().unwrap_or(512);
        let p = provider(&corpus, dim, 1.0);
        let config = TrainConfig { epochs: 2, val_fraction: 0.0, batch_size: 16, ..TrainConfig::new(kind, "ckpt") };
        let outcome = train(&config, &corpus, &p).unwrap();
        let path = dir.path().join(format!("{kind}.ckpt"));
        outcome.model.save(&path).unwrap();
        let back = HeadModel::load(&path).unwrap();
        let weights = |m: &HeadModel| -> Vec<u32> {
            let params = m.network.params().into_iter().map(|p| &p.value);
            let buffers = m.network.layers().iter().flat_map(|l| l.buffers());
            params.chain(buffers).flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
        };
        assert!(weights(&back) == weights(&outcome.model), "{kind}: weights differ after reload");
        let test = load_examples(&corpus, Split::Test, &p, 64).unwrap();
        let docs: Vec<DocEmbedding> = test.iter().map(|e| e.embedding.clone()).collect();
        let a = logits(&outcome.model, &docs);
        let b = logits(&back, &docs);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), "{kind}");
    }
}

#[test]
fn evaluate_leaves_the_model_untouched() {
    let corpus = synthetic(40, 20, 3);
    let p = provider(&corpus, 512, 1.0);
    let config = TrainConfig { epochs: 1, val_fraction: 0.0, ..TrainConfig::new(HeadKind::UseLstm, "eval") };
    let outcome = train(&config, &corpus, &p).unwrap();
    let before = outcome.model.clone();
    let test = load_examples(&corpus, Split::Test, &p, 64).unwrap();
    let (m1, p1) = evaluate(&outcome.model, &test, &corpus.manifest.class_names, 7).unwrap();
    let (m2, p2) = evaluate(&outcome.model, &test, &corpus.manifest.class_names, 32).unwrap();
    assert_eq!(outcome.model, before);
    assert_eq!(m1.confusion, m2.confusion);
    assert_eq!(p1.iter().map(|p| p.pred_label).collect::<Vec<_>>(), p2.iter().map(|p| p.pred_label).collect::<Vec<_>>());
}

#[test]
fn training_loss_falls_over_the_first_five_epochs() {
    let corpus = synthetic(200, 100, 0);
    for kind in HeadKind::ALL {
        let p = provider(&corpus, kind.input_dim().unwrap_or(512), 1.0);
        let config = TrainConfig { epochs: 5, ..TrainConfig::new(kind, "synthetic") };
        let losses = train(&config, &corpus, &p).unwrap().report.epoch_losses();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{kind}: {losses:?}");
    }
}

#[test]
fn batch_composition_depends_only_on_seed_and_epoch() {
    let lengths: Vec<usize> = (0..70).map(|i| 1 + (i * 7) % 11).collect();
    let s = RngStreams::new(5);
    let a = make_batches(&lengths, 8, &mut s.stream("harness/batches/3"));
    let b = make_batches(&lengths, 8, &mut RngStreams::new(5).stream("harness/batches/3"));
    let c = make_batches(&lengths, 8, &mut s.stream("harness/batches/4"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.iter().map(Vec::len).sum::<usize>(), 70);
}

#[test]
fn trainer_rejects_missing_classes_and_mixed_widths() {
    let corpus = synthetic(20, 0, 1);
    let p = provider(&corpus, 64, 1.0);
    let mut examples = load_examples(&corpus, Split::Train, &p, 64).unwrap();
    let names = corpus.manifest.class_names.clone();
    let config = TrainConfig::new(HeadKind::FlatMean, "x");
    let only_two: Vec<_> = examples.iter().filter(|e| e.label < 2).cloned().collect();
    assert!(matches!(
        Trainer::new(config.clone(), names.clone(), only_two, Vec::new()),
        Err(HarnessError::EmptyClass(c)) if c == "class2"
    ));
    examples[3].embedding = DocEmbedding::new("w", 32, vec![0.0; 32]).unwrap();
    assert!(matches!(Trainer::new(config, names, examples, Vec::new()), Err(HarnessError::DimMismatch { expected: 64, got: 32 })));
}

#[test]
fn run_artifacts_agree_with_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = synthetic(80, 0, 4);
    corpus.manifest.name = "toy".into();
    corpus.save_csv(&dir.path().join("toy.csv")).unwrap();
    corpus.manifest.save(&dir.path().join("toy.json")).unwrap();
    let config_path = dir.path().join("run.json");
    std::fs::write(
        &config_path,
        r#"{"model_name": "flat_mean", "dataset_name": "toy", "epochs": 8, "seed": 3,
            "data_path": "toy.csv", "manifest_path": "toy.json", "output_dir": "runs",
            "embeddings": {"kind": "hash", "dim": 64, "class_signal": 1.0}}"#,
    )
    .unwrap();
    let config = ExperimentConfig::load(&config_path).unwrap();
    assert!(matches!(config.embeddings, EmbeddingSource::Hash { dim: 64, .. }));
    let art = run_experiment(&config).unwrap();
    assert_eq!(art.run_dir, dir.path().join("runs/flat_mean_toy_s3"));
    for f in ["config.json", "report.json", "metrics.json", "predictions.csv", "model.ckpt"] {
        assert!(art.run_dir.join(f).is_file(), "{f}");
    }

    let metrics: serde_json::Value = serde_json::from_slice(&std::fs::read(art.run_dir.join("metrics.json")).unwrap()).unwrap();
    let keys: Vec<&str> = metrics.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["accuracy", "confusion", "loss", "per_class"]);

    let rows = read_predictions_csv(std::fs::File::open(art.predictions_path.unwrap()).unwrap()).unwrap();
    assert_eq!(rows.len(), 16);
    let recount = rows.iter().filter(|r| r.1 == r.2).count() as f64 / rows.len() as f64;
    assert_eq!(recount, art.metrics.as_ref().unwrap().accuracy);
    assert_eq!(metrics["accuracy"].as_f64().unwrap(), recount);

    let reloaded = HeadModel::<f32>::load(&art.checkpoint_path).unwrap();
    assert_eq!(reloaded.kind, HeadKind::FlatMean);
    assert_eq!(reloaded.param_count(), art.report.param_count);
}

#[test]
fn reference_grid_is_reproduced() {
    let want = "\
| Model | 20NG | BBC News | AG News | BBC Sports | IMDB | R8 |
|---|---|---|---|---|---|---|
| USE | 81.76 | 96.63 | 92.09 | 98.65 | 87.14 | 95.61 |
| BERT | 85.78 | 98.20 | 94.04 | 98.65 | 89.58 | 97.62 |
| HAN | 85.01 | 97.75 | 92.11 | 96.24 | 88.94 | 94.47 |
| USE+LSTM | 81.81 | 98.20 | 92.25 | 98.65 | 88.89 | 95.75 |
| USE+CNN | 80.03 | 97.53 | 92.21 | 99.32 | 89.70 | 96.44 |
| BERT+LSTM | 85.57 | 98.43 | 94.01 | 99.32 | 93.63 | 95.89 |
| BERT+CNN | 83.79 | 98.20 | 92.40 | 100.00 | 93.63 | 96.35 |
| BigBird | 85.14 | 97.97 | 92.30 | 99.32 | 94.32 | 98.03 |
| Longformer | 86.45 | 98.65 | 93.40 | 100.00 | 93.30 | 97.85 |
";
    let reference = ReferenceTable::builtin();
    assert_eq!(emit_reference_table(&reference), want);
    assert_eq!(reference.get("longformer", "20ng"), Some(86.45));
    assert_eq!(reference.get("bigbird", "imdb"), Some(94.32));
}

#[test]
fn shuffled_batches_do_not_change_eval_predictions() {
    let corpus = synthetic(30, 0, 6);
    let p = provider(&corpus, 768, 1.0);
    let mut examples = load_examples(&corpus, Split::Train, &p, 64).unwrap();
    let model = build_bert_lstm(4, 1).unwrap();
    let names = corpus.manifest.class_names.clone();
    let (_, a) = evaluate(&model, &examples, &names, 4).unwrap();
    examples.shuffle(&mut RngStreams::new(0).stream("t"));
    let (_, b) = evaluate(&model, &examples, &names, 9).unwrap();
    for pa in &a {
        let pb = b.iter().find(|p| p.doc_id == pa.doc_id).unwrap();
        assert_eq!(pa.pred_label, pb.pred_label);
        assert!((pa.confidence - pb.confidence).abs() < 1e-5);
    }
}
