use rand::Rng;

use super::ActivationFn;
use crate::neural::loss::softmax_rows;
use crate::neural::{ForwardCtx, Mode, NeuralError, Scalar, Value};

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` in training,
/// identity at evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct DropoutCache<T> {
    mask: Option<Vec<T>>,
}

impl Dropout {
    pub fn forward<T: Scalar>(&self, x: &Value<T>, ctx: &mut ForwardCtx<'_>) -> Result<(Value<T>, DropoutCache<T>), NeuralError> {
        if ctx.mode == Mode::Eval || self.rate == 0.0 {
            return Ok((x.clone(), DropoutCache { mask: None }));
        }
        let rng = ctx
            .rng
            .as_deref_mut()
            .ok_or_else(|| NeuralError::Spec("dropout in train mode needs an rng".into()))?;
        let scale = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.tensor().len())
            .map(|_| if rng.random::<f64>() < self.rate { T::zero() } else { scale })
            .collect();
        let mut y = x.clone();
        y.tensor_mut().data_mut().iter_mut().zip(&mask).for_each(|(v, &m)| *v = *v * m);
        Ok((y, DropoutCache { mask: Some(mask) }))
    }
}

impl<T: Scalar> DropoutCache<T> {
    pub fn backward(&self, dy: &Value<T>) -> Value<T> {
        let mut dx = dy.clone();
        if let Some(mask) = &self.mask {
            dx.tensor_mut().data_mut().iter_mut().zip(mask).for_each(|(v, &m)| *v = *v * m);
        }
        dx
    }
}

pub(crate) fn activation<T: Scalar>(x: &Value<T>, f: ActivationFn) -> Value<T> {
    x.with_data(x.tensor().map(|v| f.apply(v)))
}

pub(crate) fn activation_backward<T: Scalar>(y: &Value<T>, dy: &Value<T>, f: ActivationFn) -> Value<T> {
    let data = y
        .tensor()
        .data()
        .iter()
        .zip(dy.tensor().data())
        .map(|(&yv, &g)| g * f.derivative_from_output(yv))
        .collect();
    y.with_data(crate::neural::Tensor::from_vec(y.tensor().shape(), data).expect("same shape"))
}

/// Softmax over the last axis; padded sequence positions stay zero.
pub(crate) fn softmax_value<T: Scalar>(x: &Value<T>) -> Value<T> {
    let mut y = x.clone();
    match &mut y {
        Value::Flat(t) => {
            let c = t.shape()[1];
            softmax_rows(t.data_mut(), c);
        }
        Value::Seq(s) => {
            let (t, c) = (s.steps(), s.channels());
            for (bi, &len) in s.lengths.iter().enumerate() {
                softmax_rows(&mut s.data.data_mut()[bi * t * c..(bi * t + len) * c], c);
            }
        }
    }
    y
}

pub(crate) fn softmax_backward<T: Scalar>(y: &Value<T>, dy: &Value<T>) -> Value<T> {
    let c = *y.tensor().shape().last().expect("rank >= 2");
    let mut dx = dy.clone();
    for (row, yrow) in dx.tensor_mut().data_mut().chunks_mut(c).zip(y.tensor().data().chunks(c)) {
        let dot: T = row.iter().zip(yrow).map(|(&g, &p)| g * p).sum();
        row.iter_mut().zip(yrow).for_each(|(g, &p)| *g = p * (*g - dot));
    }
    dx
}
