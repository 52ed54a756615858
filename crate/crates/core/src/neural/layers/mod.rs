//! Layer specs and the fixed layer vocabulary.

mod batchnorm;
mod conv;
mod dense;
mod elementwise;
mod lstm;
mod pool;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{ForwardCtx, NeuralError, Param, Scalar, Tensor, Value};

pub use batchnorm::{BatchNorm, BatchNormCache};
pub use conv::{Conv1d, Conv1dCache};
pub use dense::{Dense, DenseCache};
pub use elementwise::{Dropout, DropoutCache};
pub use lstm::{BiLstm, BiLstmCache};
pub use pool::{GlobalMaxPool, MaxPool1d, MeanPool, PoolCache};

pub const BATCHNORM_MOMENTUM: f64 = 0.99;
pub const BATCHNORM_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationFn {
    Linear,
    Relu,
    Tanh,
}

impl ActivationFn {
    pub(crate) fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationFn::Linear => x,
            ActivationFn::Relu => x.max(T::zero()),
            ActivationFn::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    pub(crate) fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            ActivationFn::Linear => T::one(),
            ActivationFn::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationFn::Tanh => T::one() - y * y,
        }
    }
}

/// Serializable description of one layer. Input widths are inferred when a
/// [`super::Network`] is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { units: usize, activation: ActivationFn },
    Conv1d { filters: usize, kernel_size: usize },
    Bilstm { units: usize, return_sequences: bool },
    Maxpool1d { pool_size: usize },
    GlobalMaxpool,
    MeanPool,
    Dropout { rate: f64 },
    Batchnorm { momentum: f64, epsilon: f64 },
    Relu,
    Tanh,
    Softmax,
}

/// Rank and width of a value between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValueShape {
    pub seq: bool,
    pub features: usize,
}

impl LayerSpec {
    pub fn batchnorm() -> Self {
        LayerSpec::Batchnorm { momentum: BATCHNORM_MOMENTUM, epsilon: BATCHNORM_EPSILON }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Bilstm { .. } => "bilstm",
            LayerSpec::Maxpool1d { .. } => "maxpool1d",
            LayerSpec::GlobalMaxpool => "global_maxpool",
            LayerSpec::MeanPool => "mean_pool",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Batchnorm { .. } => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Softmax => "softmax",
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::Spec(m));
        match *self {
            LayerSpec::Dense { units: 0, .. } | LayerSpec::Bilstm { units: 0, .. } => bad("units must be >= 1".into()),
            LayerSpec::Conv1d { filters: 0, .. } => bad("filters must be >= 1".into()),
            LayerSpec::Conv1d { kernel_size, .. } if ![1, 3, 5].contains(&kernel_size) => {
                bad(format!("kernel_size {kernel_size} not in {{1, 3, 5}}"))
            }
            LayerSpec::Maxpool1d { pool_size: 0 } => bad("pool_size must be >= 1".into()),
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => bad(format!("dropout rate {rate} outside [0, 1)")),
            LayerSpec::Batchnorm { momentum, epsilon } if !(0.0..1.0).contains(&momentum) || epsilon <= 0.0 => {
                bad("batchnorm momentum must be in [0, 1) and epsilon > 0".into())
            }
            _ => Ok(()),
        }
    }

    /// Output shape for a given input shape, or an error if the layer does
    /// not accept that input.
    pub fn output_shape(&self, input: ValueShape) -> Result<ValueShape, NeuralError> {
        self.validate()?;
        let need_seq = |seq: bool| {
            if input.seq == seq {
                Ok(())
            } else {
                Err(NeuralError::Spec(format!(
                    "{} expects a {} input",
                    self.kind(),
                    if seq { "sequence" } else { "flat" }
                )))
            }
        };
        Ok(match *self {
            LayerSpec::Dense { units, .. } => {
                need_seq(false)?;
                ValueShape { seq: false, features: units }
            }
            LayerSpec::Conv1d { filters, .. } => {
                need_seq(true)?;
                ValueShape { seq: true, features: filters }
            }
            LayerSpec::Bilstm { units, return_sequences } => {
                need_seq(true)?;
                ValueShape { seq: return_sequences, features: 2 * units }
            }
            LayerSpec::Maxpool1d { .. } => {
                need_seq(true)?;
                input
            }
            LayerSpec::GlobalMaxpool | LayerSpec::MeanPool => {
                need_seq(true)?;
                ValueShape { seq: false, features: input.features }
            }
            LayerSpec::Batchnorm { .. } => {
                need_seq(false)?;
                input
            }
            LayerSpec::Dropout { .. } | LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Softmax => input,
        })
    }
}

pub(crate) fn glorot_uniform<T: Scalar, R: Rng>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64(dist.sample(rng))).collect();
    Tensor::from_vec(shape, data).expect("shape product matches")
}

/// Per-layer forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Dense(DenseCache<T>),
    Conv1d(Conv1dCache<T>),
    BiLstm(Box<BiLstmCache<T>>),
    Pool(PoolCache),
    Dropout(DropoutCache<T>),
    BatchNorm(BatchNormCache<T>),
    Output(Value<T>),
}

impl<T: Scalar> LayerCache<T> {
    /// Appends the discrete choices this forward pass made: max-pool
    /// winners and active ReLU units.
    pub(crate) fn routing(&self, layer: &Layer<T>, out: &mut Vec<usize>) {
        let active = |y: &Tensor<T>, out: &mut Vec<usize>| out.extend(y.data().iter().map(|&v| usize::from(v > T::zero())));
        match (layer, self) {
            (_, LayerCache::Pool(PoolCache::Max { argmax, .. })) => out.extend_from_slice(argmax),
            (Layer::Dense(d), LayerCache::Dense(c)) if d.activation == ActivationFn::Relu => active(&c.y, out),
            (Layer::Relu, LayerCache::Output(y)) => active(y.tensor(), out),
            _ => {}
        }
    }
}

/// One layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Conv1d(Conv1d<T>),
    BiLstm(BiLstm<T>),
    MaxPool1d(MaxPool1d),
    GlobalMaxPool(GlobalMaxPool),
    MeanPool(MeanPool),
    Dropout(Dropout),
    BatchNorm(BatchNorm<T>),
    Relu,
    Tanh,
    Softmax,
}

impl<T: Scalar> Layer<T> {
    pub fn from_spec<R: Rng>(spec: &LayerSpec, input: ValueShape, rng: &mut R) -> Result<Self, NeuralError> {
        spec.output_shape(input)?;
        let c = input.features;
        Ok(match *spec {
            LayerSpec::Dense { units, activation } => Layer::Dense(Dense::new(c, units, activation, rng)),
            LayerSpec::Conv1d { filters, kernel_size } => Layer::Conv1d(Conv1d::new(c, filters, kernel_size, rng)),
            LayerSpec::Bilstm { units, return_sequences } => Layer::BiLstm(BiLstm::new(c, units, return_sequences, rng)),
            LayerSpec::Maxpool1d { pool_size } => Layer::MaxPool1d(MaxPool1d { pool_size }),
            LayerSpec::GlobalMaxpool => Layer::GlobalMaxPool(GlobalMaxPool),
            LayerSpec::MeanPool => Layer::MeanPool(MeanPool),
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout { rate }),
            LayerSpec::Batchnorm { momentum, epsilon } => Layer::BatchNorm(BatchNorm::new(c, momentum, epsilon)),
            LayerSpec::Relu => Layer::Relu,
            LayerSpec::Tanh => Layer::Tanh,
            LayerSpec::Softmax => Layer::Softmax,
        })
    }

    pub fn forward(&self, x: &Value<T>, ctx: &mut ForwardCtx<'_>) -> Result<(Value<T>, LayerCache<T>), NeuralError> {
        Ok(match self {
            Layer::Dense(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Dense(c))
            }
            Layer::Conv1d(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Conv1d(c))
            }
            Layer::BiLstm(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::BiLstm(Box::new(c)))
            }
            Layer::MaxPool1d(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Pool(c))
            }
            Layer::GlobalMaxPool(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Pool(c))
            }
            Layer::MeanPool(l) => {
                let (y, c) = l.forward(x)?;
                (y, LayerCache::Pool(c))
            }
            Layer::Dropout(l) => {
                let (y, c) = l.forward(x, ctx)?;
                (y, LayerCache::Dropout(c))
            }
            Layer::BatchNorm(l) => {
                let (y, c) = l.forward(x, ctx.mode)?;
                (y, LayerCache::BatchNorm(c))
            }
            Layer::Relu => {
                let y = elementwise::activation(x, ActivationFn::Relu);
                (y.clone(), LayerCache::Output(y))
            }
            Layer::Tanh => {
                let y = elementwise::activation(x, ActivationFn::Tanh);
                (y.clone(), LayerCache::Output(y))
            }
            Layer::Softmax => {
                let y = elementwise::softmax_value(x);
                (y.clone(), LayerCache::Output(y))
            }
        })
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &LayerCache<T>, dy: &Value<T>) -> Result<Value<T>, NeuralError> {
        match (self, cache) {
            (Layer::Dense(l), LayerCache::Dense(c)) => l.backward(c, dy),
            (Layer::Conv1d(l), LayerCache::Conv1d(c)) => l.backward(c, dy),
            (Layer::BiLstm(l), LayerCache::BiLstm(c)) => l.backward(c, dy),
            (Layer::MaxPool1d(_) | Layer::GlobalMaxPool(_) | Layer::MeanPool(_), LayerCache::Pool(c)) => c.backward(dy),
            (Layer::Dropout(_), LayerCache::Dropout(c)) => Ok(c.backward(dy)),
            (Layer::BatchNorm(l), LayerCache::BatchNorm(c)) => l.backward(c, dy),
            (Layer::Relu, LayerCache::Output(y)) => Ok(elementwise::activation_backward(y, dy, ActivationFn::Relu)),
            (Layer::Tanh, LayerCache::Output(y)) => Ok(elementwise::activation_backward(y, dy, ActivationFn::Tanh)),
            (Layer::Softmax, LayerCache::Output(y)) => Ok(elementwise::softmax_backward(y, dy)),
            _ => Err(NeuralError::Shape("layer/cache mismatch in backward".into())),
        }
    }

    /// Post-forward state updates in train mode (batch-norm running stats).
    pub fn commit(&mut self, cache: &LayerCache<T>) {
        if let (Layer::BatchNorm(l), LayerCache::BatchNorm(c)) = (self, cache) {
            l.update_running(c);
        }
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::Conv1d(l) => vec![&l.kernel, &l.bias],
            Layer::BiLstm(l) => l.params(),
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Conv1d(l) => vec![&mut l.kernel, &mut l.bias],
            Layer::BiLstm(l) => l.params_mut(),
            Layer::BatchNorm(l) => vec![&mut l.gamma, &mut l.beta],
            _ => Vec::new(),
        }
    }

    /// Non-trainable state saved in checkpoints.
    pub fn buffers(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::BatchNorm(l) => vec![&l.running_mean, &l.running_var],
            _ => Vec::new(),
        }
    }

    /// Parameter values followed by buffers, in checkpoint order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::BatchNorm(l) => vec![&mut l.gamma.value, &mut l.beta.value, &mut l.running_mean, &mut l.running_var],
            other => other.params_mut().into_iter().map(|p| &mut p.value).collect(),
        }
    }
}
