use crate::neural::{NeuralError, Scalar, SeqBatch, Tensor, Value};

/// Non-overlapping max pooling over time. A row of length `L >= p` becomes
/// `L / p` windows (a trailing partial window is dropped); a row shorter than
/// the window passes through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pub pool_size: usize,
}

/// Max over the valid steps of each row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalMaxPool;

/// Mean over the valid steps of each row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeanPool;

#[derive(Debug, Clone)]
pub enum PoolCache {
    /// Flat input index feeding each output element, `usize::MAX` for
    /// padded outputs.
    Max { argmax: Vec<usize>, in_shape: [usize; 3], lengths: Vec<usize>, out_lengths: Option<Vec<usize>> },
    Mean { in_shape: [usize; 3], lengths: Vec<usize> },
}

impl MaxPool1d {
    pub fn out_len(&self, len: usize) -> usize {
        if len < self.pool_size {
            len
        } else {
            len / self.pool_size
        }
    }

    pub fn forward<T: Scalar>(&self, x: &Value<T>) -> Result<(Value<T>, PoolCache), NeuralError> {
        let x = x.expect_seq("maxpool1d")?;
        let (b, t, c) = (x.batch(), x.steps(), x.channels());
        let p = self.pool_size;
        let out_lengths: Vec<usize> = x.lengths.iter().map(|&l| self.out_len(l)).collect();
        let t_out = out_lengths.iter().copied().max().unwrap_or(1).max(1);
        let mut y = Tensor::zeros(&[b, t_out, c]);
        let mut argmax = vec![usize::MAX; b * t_out * c];
        let xd = x.data.data();
        for (bi, (&len, &olen)) in x.lengths.iter().zip(&out_lengths).enumerate() {
            let window = if len < p { 1 } else { p };
            for w in 0..olen {
                for ch in 0..c {
                    let mut best = (bi * t + w * window) * c + ch;
                    for s in w * window + 1..(w + 1) * window {
                        let idx = (bi * t + s) * c + ch;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    let o = (bi * t_out + w) * c + ch;
                    y.data_mut()[o] = xd[best];
                    argmax[o] = best;
                }
            }
        }
        let out = Value::Seq(SeqBatch { data: y, lengths: out_lengths.clone() });
        Ok((out, PoolCache::Max { argmax, in_shape: [b, t, c], lengths: x.lengths.clone(), out_lengths: Some(out_lengths) }))
    }
}

impl GlobalMaxPool {
    pub fn forward<T: Scalar>(&self, x: &Value<T>) -> Result<(Value<T>, PoolCache), NeuralError> {
        let x = x.expect_seq("global_maxpool")?;
        let (b, t, c) = (x.batch(), x.steps(), x.channels());
        let xd = x.data.data();
        let mut y = Tensor::zeros(&[b, c]);
        let mut argmax = vec![0; b * c];
        for (bi, &len) in x.lengths.iter().enumerate() {
            for ch in 0..c {
                let mut best = bi * t * c + ch;
                for s in 1..len {
                    let idx = (bi * t + s) * c + ch;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                y.data_mut()[bi * c + ch] = xd[best];
                argmax[bi * c + ch] = best;
            }
        }
        Ok((Value::Flat(y), PoolCache::Max { argmax, in_shape: [b, t, c], lengths: x.lengths.clone(), out_lengths: None }))
    }
}

impl MeanPool {
    pub fn forward<T: Scalar>(&self, x: &Value<T>) -> Result<(Value<T>, PoolCache), NeuralError> {
        let x = x.expect_seq("mean_pool")?;
        let (b, t, c) = (x.batch(), x.steps(), x.channels());
        let xd = x.data.data();
        let mut y = Tensor::zeros(&[b, c]);
        for (bi, &len) in x.lengths.iter().enumerate() {
            let row = &mut y.data_mut()[bi * c..(bi + 1) * c];
            for s in 0..len {
                let src = &xd[(bi * t + s) * c..(bi * t + s + 1) * c];
                row.iter_mut().zip(src).for_each(|(a, &v)| *a = *a + v);
            }
            let inv = T::one() / T::from_f64(len as f64);
            row.iter_mut().for_each(|v| *v = *v * inv);
        }
        Ok((Value::Flat(y), PoolCache::Mean { in_shape: [b, t, c], lengths: x.lengths.clone() }))
    }
}

impl PoolCache {
    pub fn backward<T: Scalar>(&self, dy: &Value<T>) -> Result<Value<T>, NeuralError> {
        match self {
            PoolCache::Max { argmax, in_shape, lengths, out_lengths } => {
                let g = match (out_lengths, dy) {
                    (Some(_), Value::Seq(s)) => &s.data,
                    (None, Value::Flat(t)) => t,
                    _ => return Err(NeuralError::Shape("pool backward: gradient rank mismatch".into())),
                };
                if g.len() != argmax.len() {
                    return Err(NeuralError::Shape("pool backward: gradient shape mismatch".into()));
                }
                let mut dx = Tensor::zeros(in_shape);
                for (&src, &v) in argmax.iter().zip(g.data()) {
                    if src != usize::MAX {
                        dx.data_mut()[src] = dx.data()[src] + v;
                    }
                }
                Ok(Value::Seq(SeqBatch { data: dx, lengths: lengths.clone() }))
            }
            PoolCache::Mean { in_shape, lengths } => {
                let [b, t, c] = *in_shape;
                let g = dy.expect_flat("mean_pool backward")?;
                if g.shape() != [b, c] {
                    return Err(NeuralError::Shape("mean_pool backward: gradient shape mismatch".into()));
                }
                let mut dx = Tensor::zeros(in_shape);
                for (bi, &len) in lengths.iter().enumerate() {
                    let inv = T::one() / T::from_f64(len as f64);
                    let grow = &g.data()[bi * c..(bi + 1) * c];
                    for s in 0..len {
                        dx.data_mut()[(bi * t + s) * c..(bi * t + s + 1) * c]
                            .iter_mut()
                            .zip(grow)
                            .for_each(|(a, &v)| *a = v * inv);
                    }
                }
                Ok(Value::Seq(SeqBatch { data: dx, lengths: lengths.clone() }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(data: Vec<f64>, shape: [usize; 3], lengths: Vec<usize>) -> Value<f64> {
        Value::Seq(SeqBatch::new(Tensor::from_vec(&shape, data).unwrap(), lengths).unwrap())
    }

    #[test]
    fn maxpool_windows_and_short_rows() {
        let x = seq(vec![1., 5., 2., 3., 9., 0., 4., 0., 0., 0., 0., 0.], [2, 6, 1], vec![5, 1]);
        let (y, _) = MaxPool1d { pool_size: 2 }.forward(&x).unwrap();
        let Value::Seq(y) = y else { panic!() };
        assert_eq!(y.lengths, vec![2, 1]);
        assert_eq!(y.data.data(), &[5., 3., 4., 0.]);
    }

    #[test]
    fn global_max_ignores_padding() {
        let x = seq(vec![-1., -2., 0., 0.], [1, 4, 1], vec![2]);
        let (y, cache) = GlobalMaxPool.forward(&x).unwrap();
        assert_eq!(y.tensor().data(), &[-1.]);
        let dx = cache.backward(&Value::Flat(Tensor::from_vec(&[1, 1], vec![3.0]).unwrap())).unwrap();
        assert_eq!(dx.tensor().data(), &[3., 0., 0., 0.]);
    }

    #[test]
    fn mean_uses_valid_length() {
        let x = seq(vec![2., 4., 0., 6., 6., 6.], [2, 3, 1], vec![2, 3]);
        let (y, _) = MeanPool.forward(&x).unwrap();
        assert_eq!(y.tensor().data(), &[3., 6.]);
    }
}
