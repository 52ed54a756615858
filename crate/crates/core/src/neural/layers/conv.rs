use rand::Rng;

use super::glorot_uniform;
use crate::neural::{gemm, Mat, NeuralError, Param, Scalar, SeqBatch, Tensor, Value};

/// 1-D convolution with "same" padding over the valid prefix of each row.
/// Positions outside `0..len` are read as zero and written as zero.
///
/// The kernel is stored `[K, C, F]`, which is also the `[K·C, F]` matrix
/// multiplied against the unfolded input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub kernel: Param<T>,
    pub bias: Param<T>,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache<T> {
    /// Unfolded valid positions of the whole batch, `[ΣL, K·C]`.
    cols: Vec<T>,
    lengths: Vec<usize>,
    steps: usize,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng>(channels: usize, filters: usize, kernel_size: usize, rng: &mut R) -> Self {
        let kernel = glorot_uniform(&[kernel_size, channels, filters], kernel_size * channels, kernel_size * filters, rng);
        Self { kernel: Param::new(kernel), bias: Param::new(Tensor::zeros(&[filters])) }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.value.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.kernel.value.shape()[1]
    }

    pub fn filters(&self) -> usize {
        self.kernel.value.shape()[2]
    }

    pub fn forward(&self, x: &Value<T>) -> Result<(Value<T>, Conv1dCache<T>), NeuralError> {
        let x = x.expect_seq("conv1d")?;
        let (b, t, c) = (x.batch(), x.steps(), x.channels());
        if c != self.channels() {
            return Err(NeuralError::Shape(format!("conv1d expects {} channels, got {c}", self.channels())));
        }
        let (k, f) = (self.kernel_size(), self.filters());
        let pad = (k - 1) / 2;
        let kc = k * c;
        let total: usize = x.lengths.iter().sum();

        let mut cols = vec![T::zero(); total * kc];
        let mut row = 0;
        for (bi, &len) in x.lengths.iter().enumerate() {
            let sample = &x.data.data()[bi * t * c..(bi + 1) * t * c];
            for pos in 0..len {
                let dst = &mut cols[row * kc..(row + 1) * kc];
                for j in 0..k {
                    let src = pos + j;
                    if src < pad || src - pad >= len {
                        continue;
                    }
                    let src = src - pad;
                    dst[j * c..(j + 1) * c].copy_from_slice(&sample[src * c..(src + 1) * c]);
                }
                row += 1;
            }
        }

        let mut valid = vec![T::zero(); total * f];
        for r in valid.chunks_mut(f) {
            r.copy_from_slice(self.bias.value.data());
        }
        gemm(Mat::new(&cols, total, kc), Mat::new(self.kernel.value.data(), kc, f), &mut valid, T::one());

        let mut y = Tensor::zeros(&[b, t, f]);
        let mut offset = 0;
        for (bi, &len) in x.lengths.iter().enumerate() {
            y.data_mut()[bi * t * f..bi * t * f + len * f].copy_from_slice(&valid[offset * f..(offset + len) * f]);
            offset += len;
        }
        let out = Value::Seq(SeqBatch { data: y, lengths: x.lengths.clone() });
        Ok((out, Conv1dCache { cols, lengths: x.lengths.clone(), steps: t }))
    }

    pub fn backward(&mut self, cache: &Conv1dCache<T>, dy: &Value<T>) -> Result<Value<T>, NeuralError> {
        let dy = dy.expect_seq("conv1d backward")?;
        let (t, c, k, f) = (cache.steps, self.channels(), self.kernel_size(), self.filters());
        if dy.steps() != t || dy.channels() != f || dy.batch() != cache.lengths.len() {
            return Err(NeuralError::Shape("conv1d backward: gradient shape mismatch".into()));
        }
        let pad = (k - 1) / 2;
        let kc = k * c;
        let total: usize = cache.lengths.iter().sum();

        let mut g = Vec::with_capacity(total * f);
        for (bi, &len) in cache.lengths.iter().enumerate() {
            g.extend_from_slice(&dy.data.data()[bi * t * f..bi * t * f + len * f]);
        }
        gemm(Mat::new(&cache.cols, total, kc).t(), Mat::new(&g, total, f), self.kernel.grad.data_mut(), T::one());
        let db = self.bias.grad.data_mut();
        for r in g.chunks(f) {
            db.iter_mut().zip(r).for_each(|(a, &v)| *a = *a + v);
        }

        let mut dcols = vec![T::zero(); total * kc];
        gemm(Mat::new(&g, total, f), Mat::new(self.kernel.value.data(), kc, f).t(), &mut dcols, T::zero());

        let b = cache.lengths.len();
        let mut dx = Tensor::zeros(&[b, t, c]);
        let mut row = 0;
        for (bi, &len) in cache.lengths.iter().enumerate() {
            let sample = &mut dx.data_mut()[bi * t * c..(bi + 1) * t * c];
            for pos in 0..len {
                let src_row = &dcols[row * kc..(row + 1) * kc];
                for j in 0..k {
                    let src = pos + j;
                    if src < pad || src - pad >= len {
                        continue;
                    }
                    let src = src - pad;
                    sample[src * c..(src + 1) * c]
                        .iter_mut()
                        .zip(&src_row[j * c..(j + 1) * c])
                        .for_each(|(a, &v)| *a = *a + v);
                }
                row += 1;
            }
        }
        Ok(Value::Seq(SeqBatch { data: dx, lengths: cache.lengths.clone() }))
    }
}
