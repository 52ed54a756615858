//! Dense-tensor neural core with hand-written forward and backward passes.
//!
//! The layer vocabulary is fixed to what the classification heads need:
//! dense, conv1d, BiLSTM, windowed and global max pooling, mean pooling,
//! dropout, batch normalization and standalone activations. Values flowing
//! between layers are either padded sequence batches `[B, T, C]` carrying a
//! valid-prefix length per row, or flat batches `[B, F]`.
//!
//! Every layer is generic over [`Scalar`]; training runs in `f32`, gradient
//! checks in `f64`.

mod adam;
pub mod checkpoint;
mod gradcheck;
pub mod layers;
mod loss;
mod network;
mod tensor;

use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use gradcheck::{gradient_check, CheckLoss, GradCheckEntry, GradCheckOptions, GradCheckReport};
pub use layers::{ActivationFn, Layer, LayerSpec, ValueShape};
pub use loss::{softmax, softmax_cross_entropy};
pub use network::Network;
pub use tensor::{gemm, Mat, Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid layer spec: {0}")]
    Spec(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-call forward state. Dropout draws from `rng` in train mode.
pub struct ForwardCtx<'a> {
    pub mode: Mode,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a> ForwardCtx<'a> {
    pub fn eval() -> Self {
        Self { mode: Mode::Eval, rng: None }
    }

    pub fn train(rng: &'a mut ChaCha8Rng) -> Self {
        Self { mode: Mode::Train, rng: Some(rng) }
    }
}

/// Padded batch of sequences `[B, T, C]`. Row `b` is valid on `0..lengths[b]`
/// and zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqBatch<T> {
    pub data: Tensor<T>,
    pub lengths: Vec<usize>,
}

impl<T: Scalar> SeqBatch<T> {
    pub fn new(data: Tensor<T>, lengths: Vec<usize>) -> Result<Self, NeuralError> {
        let [b, t, _] = *data.shape() else {
            return Err(NeuralError::Shape(format!("sequence batch must be rank 3, got {:?}", data.shape())));
        };
        if lengths.len() != b {
            return Err(NeuralError::Shape(format!("{} lengths for batch of {b}", lengths.len())));
        }
        if let Some(l) = lengths.iter().find(|&&l| l == 0 || l > t) {
            return Err(NeuralError::Shape(format!("sequence length {l} outside 1..={t}")));
        }
        Ok(Self { data, lengths })
    }

    /// Builds from a `[B, T]` row-major mask that must be a non-empty valid
    /// prefix on each row. Masked positions are zeroed.
    pub fn from_mask(mut data: Tensor<T>, mask: &[bool]) -> Result<Self, NeuralError> {
        let [b, t, c] = *data.shape() else {
            return Err(NeuralError::Shape(format!("sequence batch must be rank 3, got {:?}", data.shape())));
        };
        if mask.len() != b * t {
            return Err(NeuralError::Shape(format!("mask has {} entries, expected {}", mask.len(), b * t)));
        }
        let mut lengths = Vec::with_capacity(b);
        for (row, m) in mask.chunks(t.max(1)).enumerate() {
            let len = m.iter().take_while(|&&v| v).count();
            if m[len..].iter().any(|&v| v) {
                return Err(NeuralError::Shape(format!("mask row {row} is not a prefix")));
            }
            data.data_mut()[(row * t + len) * c..(row + 1) * t * c].fill(T::zero());
            lengths.push(len);
        }
        Self::new(data, lengths)
    }

    pub fn batch(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn steps(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[2]
    }
}

/// A value passed between layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Value<T> {
    Seq(SeqBatch<T>),
    Flat(Tensor<T>),
}

impl<T: Scalar> Value<T> {
    pub fn tensor(&self) -> &Tensor<T> {
        match self {
            Value::Seq(s) => &s.data,
            Value::Flat(t) => t,
        }
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor<T> {
        match self {
            Value::Seq(s) => &mut s.data,
            Value::Flat(t) => t,
        }
    }

    pub fn into_tensor(self) -> Tensor<T> {
        match self {
            Value::Seq(s) => s.data,
            Value::Flat(t) => t,
        }
    }

    pub fn batch(&self) -> usize {
        self.tensor().shape()[0]
    }

    pub(crate) fn expect_seq(&self, layer: &str) -> Result<&SeqBatch<T>, NeuralError> {
        match self {
            Value::Seq(s) => Ok(s),
            Value::Flat(t) => Err(NeuralError::Shape(format!("{layer} expects a sequence batch, got {:?}", t.shape()))),
        }
    }

    pub(crate) fn expect_flat(&self, layer: &str) -> Result<&Tensor<T>, NeuralError> {
        match self {
            Value::Flat(t) if t.rank() == 2 => Ok(t),
            other => Err(NeuralError::Shape(format!("{layer} expects a [B, F] batch, got {:?}", other.tensor().shape()))),
        }
    }

    /// Same structure (and lengths) as `self`, with `data` replaced.
    pub(crate) fn with_data(&self, data: Tensor<T>) -> Self {
        match self {
            Value::Seq(s) => Value::Seq(SeqBatch { data, lengths: s.lengths.clone() }),
            Value::Flat(_) => Value::Flat(data),
        }
    }
}

/// A trainable tensor with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub m: Tensor<T>,
    pub v: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Self { grad: zeros.clone(), m: zeros.clone(), v: zeros, value }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_mask_requires_prefix() {
        let data = Tensor::<f32>::from_vec(&[2, 3, 1], vec![1.0; 6]).unwrap();
        let s = SeqBatch::from_mask(data.clone(), &[true, true, false, true, false, false]).unwrap();
        assert_eq!(s.lengths, vec![2, 1]);
        assert_eq!(s.data.data(), &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(SeqBatch::from_mask(data.clone(), &[true, false, true, true, true, true]).is_err());
        assert!(SeqBatch::from_mask(data, &[false, false, false, true, true, true]).is_err());
    }
}
