//! Classification heads over sequences of chunk embeddings.
//!
//! | name        | input | stack |
//! |-------------|-------|-------|
//! | `use_lstm`  | 512   | BiLSTM 256 → BiLSTM 128 → global max → (dense 256 relu, dropout 0.4, batchnorm) → (dense 64 relu, dropout 0.4, batchnorm) → dense C |
//! | `use_cnn`   | 512   | 2 × (conv 512 k1, maxpool 2, dropout 0.5) → global max → dense 1024 tanh → dropout 0.5 → dense 128 tanh → dropout 0.5 → dense C |
//! | `bert_lstm` | 768   | BiLSTM 256 → BiLSTM 128 → global max → dense 64 relu → dense C |
//! | `bert_cnn`  | 768   | conv 512 k3 → conv 256 k3 → global max → dense 64 relu → dense C |
//! | `flat_mean` | any   | mean over chunks → dense C |
//!
//! Every head ends in raw logits.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedstore::DocEmbedding;
use crate::neural::checkpoint;
use crate::neural::{ActivationFn, ForwardCtx, LayerSpec, Network, NeuralError, Scalar, SeqBatch, Tensor, Value};

pub const USE_DIM: usize = 512;
pub const BERT_DIM: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    UseLstm,
    UseCnn,
    BertLstm,
    BertCnn,
    FlatMean,
}

impl HeadKind {
    pub const ALL: [HeadKind; 5] = [HeadKind::UseLstm, HeadKind::UseCnn, HeadKind::BertLstm, HeadKind::BertCnn, HeadKind::FlatMean];
    pub const HIERARCHICAL: [HeadKind; 4] = [HeadKind::UseLstm, HeadKind::UseCnn, HeadKind::BertLstm, HeadKind::BertCnn];

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::UseLstm => "use_lstm",
            HeadKind::UseCnn => "use_cnn",
            HeadKind::BertLstm => "bert_lstm",
            HeadKind::BertCnn => "bert_cnn",
            HeadKind::FlatMean => "flat_mean",
        }
    }

    /// Embedding width the architecture is defined for; `None` for
    /// `flat_mean`, which adapts to any width.
    pub fn input_dim(self) -> Option<usize> {
        match self {
            HeadKind::UseLstm | HeadKind::UseCnn => Some(USE_DIM),
            HeadKind::BertLstm | HeadKind::BertCnn => Some(BERT_DIM),
            HeadKind::FlatMean => None,
        }
    }

    pub fn layer_specs(self, num_classes: usize) -> Vec<LayerSpec> {
        use ActivationFn::{Linear, Relu, Tanh};
        let dense = |units, activation| LayerSpec::Dense { units, activation };
        let logits = dense(num_classes, Linear);
        match self {
            HeadKind::UseLstm => vec![
                LayerSpec::Bilstm { units: 256, return_sequences: true },
                LayerSpec::Bilstm { units: 128, return_sequences: true },
                LayerSpec::GlobalMaxpool,
                dense(256, Relu),
                LayerSpec::Dropout { rate: 0.4 },
                LayerSpec::batchnorm(),
                dense(64, Relu),
                LayerSpec::Dropout { rate: 0.4 },
                LayerSpec::batchnorm(),
                logits,
            ],
            HeadKind::UseCnn => {
                let mut specs = Vec::new();
                for _ in 0..2 {
                    specs.push(LayerSpec::Conv1d { filters: 512, kernel_size: 1 });
                    specs.push(LayerSpec::Maxpool1d { pool_size: 2 });
                    specs.push(LayerSpec::Dropout { rate: 0.5 });
                }
                specs.extend([
                    LayerSpec::GlobalMaxpool,
                    dense(1024, Tanh),
                    LayerSpec::Dropout { rate: 0.5 },
                    dense(128, Tanh),
                    LayerSpec::Dropout { rate: 0.5 },
                    logits,
                ]);
                specs
            }
            HeadKind::BertLstm => vec![
                LayerSpec::Bilstm { units: 256, return_sequences: true },
                LayerSpec::Bilstm { units: 128, return_sequences: true },
                LayerSpec::GlobalMaxpool,
                dense(64, Relu),
                logits,
            ],
            HeadKind::BertCnn => vec![
                LayerSpec::Conv1d { filters: 512, kernel_size: 3 },
                LayerSpec::Conv1d { filters: 256, kernel_size: 3 },
                LayerSpec::GlobalMaxpool,
                dense(64, Relu),
                logits,
            ],
            HeadKind::FlatMean => vec![LayerSpec::MeanPool, logits],
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeadKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| NeuralError::Spec(format!("unknown model {s:?}; expected one of use_lstm, use_cnn, bert_lstm, bert_cnn, flat_mean")))
    }
}

/// A named head with its initialized network.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadModel<T = f32> {
    pub kind: HeadKind,
    pub num_classes: usize,
    pub network: Network<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeadMetadata {
    model: HeadKind,
    num_classes: usize,
}

impl<T: Scalar> HeadModel<T> {
    /// Builds `kind` for `input_dim`-wide embeddings. The fixed-width heads
    /// reject any width other than their own.
    pub fn build(kind: HeadKind, input_dim: usize, num_classes: usize, seed: u64) -> Result<Self, NeuralError> {
        if num_classes < 2 {
            return Err(NeuralError::Spec(format!("num_classes must be >= 2, got {num_classes}")));
        }
        if let Some(dim) = kind.input_dim() {
            if dim != input_dim {
                return Err(NeuralError::Spec(format!("{kind} expects {dim}-dimensional embeddings, got {input_dim}")));
            }
        }
        let network = Network::new(input_dim, kind.layer_specs(num_classes), seed)?;
        Ok(Self { kind, num_classes, network })
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    /// Eval-mode logits for a padded batch.
    pub fn logits(&self, batch: &Value<T>) -> Result<Tensor<T>, NeuralError> {
        self.network.predict_logits(batch)
    }

    /// Forward over a zero-padded `[B, T, D]` batch with a `[B, T]` prefix
    /// mask.
    pub fn forward_masked(&self, batch: Tensor<T>, mask: &[bool], ctx: &mut ForwardCtx<'_>) -> Result<Tensor<T>, NeuralError> {
        let x = Value::Seq(SeqBatch::from_mask(batch, mask)?);
        Ok(self.network.forward(&x, ctx)?.0.into_tensor())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NeuralError> {
        let meta = HeadMetadata { model: self.kind, num_classes: self.num_classes };
        let meta = serde_json::to_value(meta).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        checkpoint::save(&self.network, meta, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NeuralError> {
        let (network, header) = checkpoint::load(path)?;
        let meta: HeadMetadata =
            serde_json::from_value(header.metadata).map_err(|e| NeuralError::Checkpoint(format!("head metadata: {e}")))?;
        if network.num_outputs() != meta.num_classes {
            return Err(NeuralError::Checkpoint("num_classes does not match the output layer".into()));
        }
        Ok(Self { kind: meta.model, num_classes: meta.num_classes, network })
    }
}

pub fn build_use_lstm(num_classes: usize, seed: u64) -> Result<HeadModel, NeuralError> {
    HeadModel::build(HeadKind::UseLstm, USE_DIM, num_classes, seed)
}

pub fn build_use_cnn(num_classes: usize, seed: u64) -> Result<HeadModel, NeuralError> {
    HeadModel::build(HeadKind::UseCnn, USE_DIM, num_classes, seed)
}

pub fn build_bert_lstm(num_classes: usize, seed: u64) -> Result<HeadModel, NeuralError> {
    HeadModel::build(HeadKind::BertLstm, BERT_DIM, num_classes, seed)
}

pub fn build_bert_cnn(num_classes: usize, seed: u64) -> Result<HeadModel, NeuralError> {
    HeadModel::build(HeadKind::BertCnn, BERT_DIM, num_classes, seed)
}

pub fn build_flat_mean(input_dim: usize, num_classes: usize, seed: u64) -> Result<HeadModel, NeuralError> {
    HeadModel::build(HeadKind::FlatMean, input_dim, num_classes, seed)
}

/// Pads documents to the longest one in the batch, `[B, T_max, D]`.
pub fn pad_batch<T: Scalar>(docs: &[&DocEmbedding]) -> Result<Value<T>, NeuralError> {
    let first = docs.first().ok_or_else(|| NeuralError::Shape("empty batch".into()))?;
    let dim = first.dim();
    let steps = docs.iter().map(|d| d.n_chunks()).max().unwrap_or(1);
    let mut data = vec![T::zero(); docs.len() * steps * dim];
    let mut lengths = Vec::with_capacity(docs.len());
    for (b, d) in docs.iter().enumerate() {
        if d.dim() != dim {
            return Err(NeuralError::Shape(format!("document {} has dim {}, batch has {dim}", d.doc_id, d.dim())));
        }
        let dst = &mut data[b * steps * dim..b * steps * dim + d.data().len()];
        dst.iter_mut().zip(d.data()).for_each(|(o, &v)| *o = T::from_f64(f64::from(v)));
        lengths.push(d.n_chunks());
    }
    Ok(Value::Seq(SeqBatch::new(Tensor::from_vec(&[docs.len(), steps, dim], data)?, lengths)?))
}

/// Index of the largest value in each row; ties go to the lowest index.
pub fn argmax_rows<T: Scalar>(logits: &Tensor<T>) -> Vec<usize> {
    let c = logits.shape()[1];
    logits
        .data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (k, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lstm_params(input: usize, units: usize) -> usize {
        2 * 4 * ((input + units) * units + units)
    }

    #[test]
    fn first_layer_parameter_counts() {
        let m = build_use_lstm(4, 0).unwrap();
        let first: usize = m.network.layers()[0].params().iter().map(|p| p.len()).sum();
        assert_eq!(first, lstm_params(512, 256));
        assert_eq!(first, 1_574_912);

        let m = build_bert_lstm(4, 0).unwrap();
        let first: usize = m.network.layers()[0].params().iter().map(|p| p.len()).sum();
        assert_eq!(first, 2_099_200);

        let m = build_bert_cnn(4, 0).unwrap();
        let first: usize = m.network.layers()[0].params().iter().map(|p| p.len()).sum();
        assert_eq!(first, 3 * 768 * 512 + 512);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(build_use_cnn(1, 0).is_err());
        assert!(HeadModel::<f32>::build(HeadKind::UseLstm, 768, 3, 0).is_err());
        assert!(build_flat_mean(64, 3, 0).is_ok());
        assert!("bert_gru".parse::<HeadKind>().is_err());
        assert_eq!("use_cnn".parse::<HeadKind>().unwrap(), HeadKind::UseCnn);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        let t = Tensor::<f32>::from_vec(&[2, 3], vec![1.0, 3.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(argmax_rows(&t), vec![1, 0]);
    }
}
