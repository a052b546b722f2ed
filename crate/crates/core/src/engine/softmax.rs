use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

/// Lower clamp applied to a probability before taking its logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

fn class_count<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<usize> {
    match t.shape().last() {
        Some(&k) if k >= 2 => Ok(k),
        _ => Err(Error::shape(op, format!("need at least 2 classes on the last axis, got {:?}", t.shape()))),
    }
}

/// Row-wise softmax over the last axis, max-subtracted.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let k = class_count(logits, "softmax")?;
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut total = T::zero();
        for &v in row {
            let e = (v - max).exp();
            total += e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e /= total);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Vector-Jacobian product of softmax: `dx = p * (dy - <dy, p>)` per row.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
    probs.expect_same_shape("softmax_backward", output_grad)?;
    let k = class_count(probs, "softmax_backward")?;
    let mut dx = Vec::with_capacity(probs.len());
    for (p, g) in probs.data().chunks_exact(k).zip(output_grad.data().chunks_exact(k)) {
        let dot: T = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
        dx.extend(p.iter().zip(g).map(|(&a, &b)| a * (b - dot)));
    }
    Tensor::new(probs.shape().to_vec(), dx)
}

/// `-ln(max(probs[label], floor))` for a single probability row.
pub fn cross_entropy<T: Scalar>(probs: &[T], label: usize) -> Result<T> {
    if probs.len() < 2 || label >= probs.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside [0, {})",
            probs.len()
        )));
    }
    Ok(-probs[label].max(T::from_f64_lossy(PROBABILITY_FLOOR)).ln())
}

/// Gradient of the mean cross-entropy over `N` rows with respect to the
/// logits that produced `probs`: `(p - onehot(label)) / N`.
pub fn softmax_cross_entropy_backward<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let k = class_count(probs, "softmax_cross_entropy_backward")?;
    let n = probs.len() / k;
    if labels.len() != n {
        return Err(Error::shape(
            "softmax_cross_entropy_backward",
            format!("{} labels for {n} rows", labels.len()),
        ));
    }
    let scale = T::one() / T::from_usize_lossy(n);
    let mut grad = probs.data().to_vec();
    for (row, &label) in grad.chunks_exact_mut(k).zip(labels) {
        if label >= k {
            return Err(Error::InvalidArgument(format!("label {label} outside [0, {k})")));
        }
        row[label] -= T::one();
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Tensor::new(probs.shape().to_vec(), grad)
}
