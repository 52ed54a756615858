use crate::neural::{Mode, NeuralError, Param, Scalar, Tensor, Value};

/// Batch normalization over `[B, F]`. Training normalizes with the biased
/// batch statistics; evaluation uses the running averages, updated as
/// `running = momentum * running + (1 - momentum) * batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    mode: Mode,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    mean: Vec<T>,
    var: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(features: usize, momentum: f64, epsilon: f64) -> Self {
        let mut gamma = Tensor::zeros(&[features]);
        gamma.fill(T::one());
        let mut running_var = Tensor::zeros(&[features]);
        running_var.fill(T::one());
        Self {
            gamma: Param::new(gamma),
            beta: Param::new(Tensor::zeros(&[features])),
            running_mean: Tensor::zeros(&[features]),
            running_var,
            momentum,
            epsilon,
        }
    }

    fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Value<T>, mode: Mode) -> Result<(Value<T>, BatchNormCache<T>), NeuralError> {
        let x = x.expect_flat("batchnorm")?;
        let (b, f) = (x.shape()[0], x.shape()[1]);
        if f != self.features() {
            return Err(NeuralError::Shape(format!("batchnorm expects {} features, got {f}", self.features())));
        }
        let eps = T::from_f64(self.epsilon);
        let (mean, var) = match mode {
            Mode::Train => {
                let n = T::from_f64(b as f64);
                let mut mean = vec![T::zero(); f];
                for row in x.data().chunks(f) {
                    mean.iter_mut().zip(row).for_each(|(m, &v)| *m = *m + v);
                }
                mean.iter_mut().for_each(|m| *m = *m / n);
                let mut var = vec![T::zero(); f];
                for row in x.data().chunks(f) {
                    for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                        *s = *s + (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s = *s / n);
                (mean, var)
            }
            Mode::Eval => (self.running_mean.data().to_vec(), self.running_var.data().to_vec()),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = Vec::with_capacity(b * f);
        let mut y = Tensor::zeros(&[b, f]);
        for (row, out) in x.data().chunks(f).zip(y.data_mut().chunks_mut(f)) {
            for k in 0..f {
                let h = (row[k] - mean[k]) * inv_std[k];
                xhat.push(h);
                out[k] = self.gamma.value.data()[k] * h + self.beta.value.data()[k];
            }
        }
        Ok((Value::Flat(y), BatchNormCache { mode, xhat, inv_std, mean, var }))
    }

    pub fn update_running(&mut self, cache: &BatchNormCache<T>) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = T::from_f64(self.momentum);
        let one_m = T::one() - m;
        for (r, &v) in self.running_mean.data_mut().iter_mut().zip(&cache.mean) {
            *r = m * *r + one_m * v;
        }
        for (r, &v) in self.running_var.data_mut().iter_mut().zip(&cache.var) {
            *r = m * *r + one_m * v;
        }
    }

    pub fn backward(&mut self, cache: &BatchNormCache<T>, dy: &Value<T>) -> Result<Value<T>, NeuralError> {
        let dy = dy.expect_flat("batchnorm backward")?;
        let f = self.features();
        if dy.len() != cache.xhat.len() || dy.shape()[1] != f {
            return Err(NeuralError::Shape("batchnorm backward: gradient shape mismatch".into()));
        }
        let b = dy.shape()[0];
        let mut sum_dy = vec![T::zero(); f];
        let mut sum_dy_xhat = vec![T::zero(); f];
        for (g, h) in dy.data().chunks(f).zip(cache.xhat.chunks(f)) {
            for k in 0..f {
                sum_dy[k] = sum_dy[k] + g[k];
                sum_dy_xhat[k] = sum_dy_xhat[k] + g[k] * h[k];
            }
        }
        self.gamma.grad.add_assign(&Tensor::from_vec(&[f], sum_dy_xhat.clone())?);
        self.beta.grad.add_assign(&Tensor::from_vec(&[f], sum_dy.clone())?);

        let gamma = self.gamma.value.data();
        let mut dx = Tensor::zeros(&[b, f]);
        let n = T::from_f64(b as f64);
        for ((out, g), h) in dx.data_mut().chunks_mut(f).zip(dy.data().chunks(f)).zip(cache.xhat.chunks(f)) {
            for k in 0..f {
                let scale = gamma[k] * cache.inv_std[k];
                out[k] = match cache.mode {
                    Mode::Train => scale * (g[k] - sum_dy[k] / n - h[k] * sum_dy_xhat[k] / n),
                    Mode::Eval => scale * g[k],
                };
            }
        }
        Ok(Value::Flat(dx))
    }
}
