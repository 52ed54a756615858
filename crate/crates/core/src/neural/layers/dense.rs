use rand::Rng;

use super::{glorot_uniform, ActivationFn};
use crate::neural::{gemm, Mat, NeuralError, Param, Scalar, Tensor, Value};

/// Fully connected layer on `[B, F]` input, `y = act(x W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub activation: ActivationFn,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    x: Tensor<T>,
    pub(super) y: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng>(input: usize, units: usize, activation: ActivationFn, rng: &mut R) -> Self {
        Self {
            weight: Param::new(glorot_uniform(&[input, units], input, units, rng)),
            bias: Param::new(Tensor::zeros(&[units])),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn units(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&self, x: &Value<T>) -> Result<(Value<T>, DenseCache<T>), NeuralError> {
        let x = x.expect_flat("dense")?;
        let (b, f) = (x.shape()[0], x.shape()[1]);
        if f != self.input_dim() {
            return Err(NeuralError::Shape(format!("dense expects {} features, got {f}", self.input_dim())));
        }
        let u = self.units();
        let mut y = Tensor::zeros(&[b, u]);
        for row in y.data_mut().chunks_mut(u) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(Mat::new(x.data(), b, f), Mat::new(self.weight.value.data(), f, u), y.data_mut(), T::one());
        if self.activation != ActivationFn::Linear {
            let act = self.activation;
            y.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
        }
        Ok((Value::Flat(y.clone()), DenseCache { x: x.clone(), y }))
    }

    pub fn backward(&mut self, cache: &DenseCache<T>, dy: &Value<T>) -> Result<Value<T>, NeuralError> {
        let dy = dy.expect_flat("dense backward")?;
        if dy.shape() != cache.y.shape() {
            return Err(NeuralError::Shape("dense backward: gradient shape mismatch".into()));
        }
        let (b, f, u) = (cache.x.shape()[0], self.input_dim(), self.units());
        let act = self.activation;
        let dz: Vec<T> = dy
            .data()
            .iter()
            .zip(cache.y.data())
            .map(|(&g, &y)| g * act.derivative_from_output(y))
            .collect();
        gemm(Mat::new(cache.x.data(), b, f).t(), Mat::new(&dz, b, u), self.weight.grad.data_mut(), T::one());
        let db = self.bias.grad.data_mut();
        for row in dz.chunks(u) {
            db.iter_mut().zip(row).for_each(|(a, &g)| *a = *a + g);
        }
        let mut dx = Tensor::zeros(&[b, f]);
        gemm(Mat::new(&dz, b, u), Mat::new(self.weight.value.data(), f, u).t(), dx.data_mut(), T::zero());
        Ok(Value::Flat(dx))
    }
}
