use super::{NeuralError, Scalar, Tensor};

/// In-place row-wise softmax of a `[rows, c]` buffer.
pub(crate) fn softmax_rows<T: Scalar>(data: &mut [T], c: usize) {
    for row in data.chunks_mut(c) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        row.iter_mut().for_each(|v| *v = *v / sum);
    }
}

pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let mut p = logits.clone();
    let c = *logits.shape().last().expect("rank >= 1");
    softmax_rows(p.data_mut(), c);
    p
}

/// Mean cross-entropy of `softmax(logits)` against integer labels, and its
/// gradient with respect to the logits. Computed through log-sum-exp.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(f64, Tensor<T>), NeuralError> {
    let [b, c] = *logits.shape() else {
        return Err(NeuralError::Shape(format!("logits must be [B, C], got {:?}", logits.shape())));
    };
    if labels.len() != b {
        return Err(NeuralError::Shape(format!("{} labels for batch of {b}", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(NeuralError::Label { label, classes: c });
    }
    let mut grad = Tensor::zeros(&[b, c]);
    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    for ((row, g), &y) in logits.data().chunks(c).zip(grad.data_mut().chunks_mut(c)).zip(labels) {
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.as_f64() - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[y].as_f64();
        for (k, (gv, v)) in g.iter_mut().zip(row).enumerate() {
            let p = (v.as_f64() - lse).exp();
            let target = if k == y { 1.0 } else { 0.0 };
            *gv = T::from_f64((p - target) * inv_b);
        }
    }
    if !loss.is_finite() {
        return Err(NeuralError::NonFinite("cross-entropy".into()));
    }
    Ok((loss * inv_b, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let logits = Tensor::<f64>::zeros(&[2, 4]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((grad.data()[0] - (0.25 - 1.0) / 2.0).abs() < 1e-12);
        assert!((grad.data()[1] - 0.25 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn stable_for_large_logits() {
        let logits = Tensor::<f32>::from_vec(&[1, 3], vec![1000.0, 0.0, -1000.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-6);
        let (loss, _) = softmax_cross_entropy(&logits, &[2]).unwrap();
        assert!((loss - 2000.0).abs() < 1e-3);
        let p = softmax(&logits);
        assert!(p.all_finite());
    }

    #[test]
    fn rejects_bad_labels() {
        let logits = Tensor::<f32>::zeros(&[1, 3]);
        assert!(matches!(softmax_cross_entropy(&logits, &[3]), Err(NeuralError::Label { .. })));
    }
}
