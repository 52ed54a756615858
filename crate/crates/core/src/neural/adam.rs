use super::{Param, Scalar};

/// Adam with bias-corrected moments. Moments live on each [`Param`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step<'a, T: Scalar>(&mut self, params: impl IntoIterator<Item = &'a mut Param<T>>) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (ob1, ob2) = (T::one() - b1, T::one() - b2);
        let step = T::from_f64(self.lr * c2.sqrt() / c1);
        let eps = T::from_f64(self.epsilon * c2.sqrt());
        for p in params {
            let Param { value, grad, m, v } = p;
            for (((w, &g), m), v) in value.data_mut().iter_mut().zip(grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = b1 * *m + ob1 * g;
                *v = b2 * *v + ob2 * g * g;
                *w = *w - step * *m / (v.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Tensor;

    #[test]
    fn matches_textbook_update() {
        let mut p = Param::new(Tensor::<f64>::from_vec(&[2], vec![1.0, -2.0]).unwrap());
        let grads = [[0.5, -0.1], [0.3, 0.2], [-0.4, 0.0]];
        let mut adam = Adam::new(0.01);
        let (mut w, mut m, mut v) = ([1.0f64, -2.0], [0.0f64; 2], [0.0f64; 2]);
        for (step, g) in grads.iter().enumerate() {
            p.grad.data_mut().copy_from_slice(g);
            adam.step([&mut p]);
            let t = step as i32 + 1;
            for k in 0..2 {
                m[k] = 0.9 * m[k] + 0.1 * g[k];
                v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
                let mh = m[k] / (1.0 - 0.9f64.powi(t));
                let vh = v[k] / (1.0 - 0.999f64.powi(t));
                w[k] -= 0.01 * mh / (vh.sqrt() + 1e-8);
            }
        }
        for (got, want) in p.value.data().iter().zip(&w) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}
