use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics, Prediction};
use super::{HarnessError, TrainConfig};
use crate::corpus::{stratified_partition, Corpus, Split};
use crate::embedstore::{DocEmbedding, EmbeddingProvider};
use crate::heads::{argmax_rows, pad_batch, HeadModel};
use crate::neural::Adam;
use crate::rng::RngStreams;

/// A labeled document with its chunk embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub doc_id: String,
    pub label: usize,
    pub embedding: DocEmbedding,
}

/// Looks up every document of `split`, keeping at most `max_chunks` rows.
pub fn load_examples(
    corpus: &Corpus,
    split: Split,
    provider: &dyn EmbeddingProvider,
    max_chunks: usize,
) -> Result<Vec<Example>, HarnessError> {
    corpus
        .split(split)
        .map(|d| {
            let mut embedding = provider.lookup(&d.doc_id)?;
            if embedding.n_chunks() > max_chunks {
                let dim = embedding.dim();
                embedding = DocEmbedding::new(d.doc_id.clone(), dim, embedding.data()[..max_chunks * dim].to_vec())?;
            }
            Ok(Example { doc_id: d.doc_id.clone(), label: d.label_id, embedding })
        })
        .collect()
}

/// Shuffles, stable-sorts by chunk count, cuts into batches of
/// `batch_size`, then shuffles the batch order.
pub fn make_batches<R: Rng>(lengths: &[usize], batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean train-mode loss over the epoch's batches, weighted by size.
    pub train_loss: f64,
    /// Train-mode accuracy accumulated during the epoch.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub param_count: usize,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept (1-based).
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub stopped_early: bool,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metrics: Option<Metrics>,
}

impl TrainReport {
    pub fn epoch_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HeadModel,
    pub report: TrainReport,
    /// Test-split predictions of the returned model, in corpus order.
    pub test_predictions: Vec<Prediction>,
}

struct Best {
    accuracy: f64,
    loss: f64,
    epoch: usize,
    model: HeadModel,
}

/// Epoch-by-epoch trainer. Batch order and dropout masks for epoch `e` come
/// from the `harness/batches/{e}` and `harness/dropout/{e}` streams of the
/// run seed.
pub struct Trainer {
    config: TrainConfig,
    class_names: Vec<String>,
    model: HeadModel,
    adam: Adam,
    train: Vec<Example>,
    val: Vec<Example>,
    streams: RngStreams,
    history: Vec<EpochStats>,
    best: Option<Best>,
    since_best: usize,
    started: Instant,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        class_names: Vec<String>,
        train: Vec<Example>,
        val: Vec<Example>,
    ) -> Result<Self, HarnessError> {
        config.validate()?;
        let first = train.first().ok_or(HarnessError::EmptySplit("train"))?;
        let dim = first.embedding.dim();
        let mut seen = vec![false; class_names.len()];
        for e in train.iter().chain(&val) {
            if e.embedding.dim() != dim {
                return Err(HarnessError::DimMismatch { expected: dim, got: e.embedding.dim() });
            }
            if e.label >= class_names.len() {
                return Err(HarnessError::Config(format!("label {} out of range for {} classes", e.label, class_names.len())));
            }
        }
        train.iter().for_each(|e| seen[e.label] = true);
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(HarnessError::EmptyClass(class_names[c].clone()));
        }
        let model = HeadModel::build(config.model_name, dim, class_names.len(), config.seed)?;
        Ok(Self {
            adam: Adam::new(config.lr),
            streams: RngStreams::new(config.seed),
            config,
            class_names,
            model,
            train,
            val,
            history: Vec::new(),
            best: None,
            since_best: 0,
            started: Instant::now(),
        })
    }

    pub fn model(&self) -> &HeadModel {
        &self.model
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    pub fn train_examples(&self) -> &[Example] {
        &self.train
    }

    pub fn epochs_run(&self) -> usize {
        self.history.len()
    }

    pub fn run_epoch(&mut self) -> Result<&EpochStats, HarnessError> {
        let start = Instant::now();
        let epoch = self.history.len() + 1;
        let lengths: Vec<usize> = self.train.iter().map(|e| e.embedding.n_chunks()).collect();
        let batches = make_batches(&lengths, self.config.batch_size, &mut self.streams.stream(&format!("harness/batches/{epoch}")));
        let mut dropout = self.streams.stream(&format!("harness/dropout/{epoch}"));

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in &batches {
            let docs: Vec<&DocEmbedding> = batch.iter().map(|&i| &self.train[i].embedding).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| self.train[i].label).collect();
            let x = pad_batch::<f32>(&docs)?;
            let (loss, logits) = self.model.network.train_step(&x, &labels, &mut self.adam, &mut dropout)?;
            loss_sum += loss * batch.len() as f64;
            correct += argmax_rows(&logits).iter().zip(&labels).filter(|(p, y)| p == y).count();
        }
        let n = self.train.len() as f64;

        let (val_loss, val_accuracy) = if self.val.is_empty() {
            (None, None)
        } else {
            let (m, _) = evaluate(&self.model, &self.val, &self.class_names, self.config.batch_size)?;
            (Some(m.loss), Some(m.accuracy))
        };
        if let (Some(acc), Some(loss)) = (val_accuracy, val_loss) {
            let improved = self
                .best
                .as_ref()
                .is_none_or(|b| acc > b.accuracy || (acc == b.accuracy && loss < b.loss));
            if improved {
                self.best = Some(Best { accuracy: acc, loss, epoch, model: self.model.clone() });
                self.since_best = 0;
            } else {
                self.since_best += 1;
            }
        }
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.4}{}",
            loss_sum / n,
            correct as f64 / n,
            val_accuracy.map(|a| format!(" val_acc {a:.4}")).unwrap_or_default()
        );
        self.history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.history.last().expect("just pushed"))
    }

    /// True once the epoch budget is spent or validation has not improved
    /// for `early_stop_patience` epochs. An epoch improves on the best one
    /// with higher accuracy, or equal accuracy and lower loss.
    pub fn should_stop(&self) -> bool {
        let patience = self.config.early_stop_patience;
        self.history.len() >= self.config.epochs || (patience > 0 && self.since_best >= patience)
    }

    /// Restores the best-validation weights (the latest weights when there
    /// is no validation set) and evaluates on `test`.
    pub fn finish(self, test: &[Example]) -> Result<TrainOutcome, HarnessError> {
        let stopped_early = self.history.len() < self.config.epochs;
        let (model, best_epoch, best_val_accuracy) = match self.best {
            Some(b) => (b.model, b.epoch, Some(b.accuracy)),
            None => (self.model, self.history.len(), None),
        };
        let (test_metrics, test_predictions) = if test.is_empty() {
            (None, Vec::new())
        } else {
            let (m, p) = evaluate(&model, test, &self.class_names, self.config.batch_size)?;
            (Some(m), p)
        };
        let report = TrainReport {
            param_count: model.param_count(),
            config: self.config,
            epochs: self.history,
            best_epoch,
            best_val_accuracy,
            stopped_early,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            checkpoint_path: None,
            test_metrics,
        };
        Ok(TrainOutcome { model, report, test_predictions })
    }

    pub fn fit(mut self, test: &[Example]) -> Result<TrainOutcome, HarnessError> {
        while !self.should_stop() {
            self.run_epoch()?;
        }
        self.finish(test)
    }
}

/// Trains on the corpus's train split (minus a stratified validation share)
/// and reports test metrics when the corpus has a test split.
pub fn train(config: &TrainConfig, corpus: &Corpus, provider: &dyn EmbeddingProvider) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    let all = load_examples(corpus, Split::Train, provider, config.max_chunks)?;
    if all.is_empty() {
        return Err(HarnessError::EmptySplit("train"));
    }
    let (train, val) = if config.val_fraction > 0.0 {
        let labels: Vec<usize> = all.iter().map(|e| e.label).collect();
        let mut rng = RngStreams::new(config.seed).stream("harness/val_split");
        let keep = stratified_partition(&labels, corpus.manifest.num_classes, 1.0 - config.val_fraction, &mut rng)?;
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for (e, k) in all.into_iter().zip(keep) {
            if k {
                train.push(e)
            } else {
                val.push(e)
            }
        }
        (train, val)
    } else {
        (all, Vec::new())
    };
    let test = load_examples(corpus, Split::Test, provider, config.max_chunks)?;
    Trainer::new(config.clone(), corpus.manifest.class_names.clone(), train, val)?.fit(&test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_everything_once_and_group_by_length() {
        let lengths = [5, 1, 3, 1, 5, 2, 4, 3, 1];
        let mut rng = RngStreams::new(4).stream("t");
        let batches = make_batches(&lengths, 3, &mut rng);
        let mut all: Vec<usize> = batches.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..lengths.len()).collect::<Vec<_>>());
        let mut spans: Vec<(usize, usize)> = batches
            .iter()
            .map(|b| (b.iter().map(|&i| lengths[i]).min().unwrap(), b.iter().map(|&i| lengths[i]).max().unwrap()))
            .collect();
        spans.sort();
        assert!(spans.windows(2).all(|w| w[0].1 <= w[1].0));
    }

    #[test]
    fn batches_depend_only_on_rng_state() {
        let lengths: Vec<usize> = (0..50).map(|i| i % 7 + 1).collect();
        let a = make_batches(&lengths, 8, &mut RngStreams::new(1).stream("b/1"));
        let b = make_batches(&lengths, 8, &mut RngStreams::new(1).stream("b/1"));
        let c = make_batches(&lengths, 8, &mut RngStreams::new(1).stream("b/2"));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
