use rand_chacha::ChaCha8Rng;

use super::layers::{LayerCache, ValueShape};
use super::{softmax, softmax_cross_entropy, Adam, ForwardCtx, Layer, LayerSpec, NeuralError, Param, Scalar, Tensor, Value};
use crate::rng::RngStreams;

/// A stack of layers applied to `[B, T, input_dim]` sequence batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    input_dim: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer<T>>,
    output: ValueShape,
}

impl<T: Scalar> Network<T> {
    /// Builds and initializes the stack. Layer `i` draws its initial weights
    /// from the `init/{i}` stream of `seed`, so an `f32` and an `f64` network
    /// built from the same arguments hold the same values up to rounding.
    pub fn new(input_dim: usize, specs: Vec<LayerSpec>, seed: u64) -> Result<Self, NeuralError> {
        if input_dim == 0 {
            return Err(NeuralError::Spec("input_dim must be >= 1".into()));
        }
        let streams = RngStreams::new(seed);
        let mut shape = ValueShape { seq: true, features: input_dim };
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let mut rng = streams.stream(&format!("init/{i}"));
            layers.push(Layer::from_spec(spec, shape, &mut rng)?);
            shape = spec.output_shape(shape)?;
        }
        Ok(Self { input_dim, specs, layers, output: shape })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn output_shape(&self) -> ValueShape {
        self.output
    }

    /// Width of a flat output, i.e. the number of classes for a classifier.
    pub fn num_outputs(&self) -> usize {
        self.output.features
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    fn check_input(&self, x: &Value<T>) -> Result<(), NeuralError> {
        let s = x.expect_seq("network input")?;
        if s.channels() != self.input_dim {
            return Err(NeuralError::Shape(format!("network expects {} input features, got {}", self.input_dim, s.channels())));
        }
        Ok(())
    }

    /// Pure forward pass; no state is changed.
    pub fn forward(&self, x: &Value<T>, ctx: &mut ForwardCtx<'_>) -> Result<(Value<T>, Vec<LayerCache<T>>), NeuralError> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur: Option<Value<T>> = None;
        for layer in &self.layers {
            let (y, cache) = layer.forward(cur.as_ref().unwrap_or(x), ctx)?;
            caches.push(cache);
            cur = Some(y);
        }
        Ok((cur.unwrap_or_else(|| x.clone()), caches))
    }

    /// Applies train-mode state updates recorded in `caches`.
    pub fn commit(&mut self, caches: &[LayerCache<T>]) {
        for (layer, cache) in self.layers.iter_mut().zip(caches) {
            layer.commit(cache);
        }
    }

    /// Backpropagates `dy` and accumulates parameter gradients. Returns the
    /// gradient with respect to the network input.
    pub fn backward(&mut self, caches: &[LayerCache<T>], dy: Value<T>) -> Result<Value<T>, NeuralError> {
        if caches.len() != self.layers.len() {
            return Err(NeuralError::Shape("cache count does not match layer count".into()));
        }
        let mut g = dy;
        for (layer, cache) in self.layers.iter_mut().zip(caches).rev() {
            g = layer.backward(cache, &g)?;
        }
        Ok(g)
    }

    /// Eval-mode logits `[B, C]`.
    pub fn predict_logits(&self, x: &Value<T>) -> Result<Tensor<T>, NeuralError> {
        let (y, _) = self.forward(x, &mut ForwardCtx::eval())?;
        match y {
            Value::Flat(t) => Ok(t),
            Value::Seq(_) => Err(NeuralError::Shape("network output is a sequence, expected [B, C]".into())),
        }
    }

    pub fn predict_proba(&self, x: &Value<T>) -> Result<Tensor<T>, NeuralError> {
        Ok(softmax(&self.predict_logits(x)?))
    }

    /// Eval-mode mean cross-entropy.
    pub fn eval_loss(&self, x: &Value<T>, labels: &[usize]) -> Result<f64, NeuralError> {
        Ok(softmax_cross_entropy(&self.predict_logits(x)?, labels)?.0)
    }

    /// One optimizer step on a batch; returns the train-mode loss and logits.
    pub fn train_step(
        &mut self,
        x: &Value<T>,
        labels: &[usize],
        adam: &mut Adam,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Tensor<T>), NeuralError> {
        self.zero_grad();
        let (y, caches) = self.forward(x, &mut ForwardCtx::train(rng))?;
        let logits = match y {
            Value::Flat(t) => t,
            Value::Seq(_) => return Err(NeuralError::Shape("network output is a sequence, expected [B, C]".into())),
        };
        if !logits.all_finite() {
            return Err(NeuralError::NonFinite("forward pass".into()));
        }
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels)?;
        self.commit(&caches);
        self.backward(&caches, Value::Flat(dlogits))?;
        adam.step(self.params_mut());
        Ok((loss, logits))
    }
}
