use serde::{Deserialize, Serialize};

use super::LayerGradients;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept on the old running statistic at each update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Tensor<T>,
    pub var: Tensor<T>,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: Tensor::zeros(vec![channels]),
            var: Tensor::filled(vec![channels], T::one()),
        }
    }
}

/// Saved by [`batchnorm_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    normalized: Tensor<T>,
    inv_std: Vec<T>,
    mode: Mode,
}

fn channels_of<T: Scalar>(input: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<usize> {
    let c = *input
        .shape()
        .last()
        .ok_or_else(|| Error::shape("batchnorm", "input has rank 0"))?;
    if gamma.len() != c || beta.len() != c {
        return Err(Error::shape(
            "batchnorm",
            format!(
                "channel dimension {c} but gamma has {} and beta has {}",
                gamma.len(),
                beta.len()
            ),
        ));
    }
    Ok(c)
}

/// Per-channel batch normalization over every axis but the last.
///
/// In [`Mode::Train`] the batch statistics normalize the input and `stats`
/// is moved toward them by an exponential moving average; in
/// [`Mode::Infer`] `stats` is used as-is.
pub fn batchnorm_forward<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    stats: &mut RunningStats<T>,
    mode: Mode,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let c = channels_of(input, gamma, beta)?;
    if stats.mean.len() != c || stats.var.len() != c {
        return Err(Error::shape(
            "batchnorm",
            format!("running statistics do not have {c} channels"),
        ));
    }
    let eps = T::from_f64_lossy(BN_EPSILON);
    let x = input.data();
    let count = x.len() / c.max(1);

    let (mean, var) = match mode {
        Mode::Train => {
            let n = T::from_usize_lossy(count.max(1));
            let mut mean = vec![T::zero(); c];
            for px in x.chunks_exact(c) {
                for (m, &v) in mean.iter_mut().zip(px) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![T::zero(); c];
            for px in x.chunks_exact(c) {
                for ((s, &v), &m) in var.iter_mut().zip(px).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= n);

            let momentum = T::from_f64_lossy(BN_MOMENTUM);
            let keep = T::one() - momentum;
            for (r, &m) in stats.mean.data_mut().iter_mut().zip(&mean) {
                *r = momentum * *r + keep * m;
            }
            for (r, &v) in stats.var.data_mut().iter_mut().zip(&var) {
                *r = momentum * *r + keep * v;
            }
            (mean, var)
        }
        Mode::Infer => (stats.mean.data().to_vec(), stats.var.data().to_vec()),
    };

    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut normalized = Vec::with_capacity(x.len());
    let mut out = Vec::with_capacity(x.len());
    for px in x.chunks_exact(c) {
        for ch in 0..c {
            let h = (px[ch] - mean[ch]) * inv_std[ch];
            normalized.push(h);
            out.push(gamma.data()[ch] * h + beta.data()[ch]);
        }
    }
    let shape = input.shape().to_vec();
    Ok((
        Tensor::new(shape.clone(), out)?,
        BatchNormCache {
            normalized: Tensor::new(shape, normalized)?,
            inv_std,
            mode,
        },
    ))
}

/// Gradients with respect to `"gamma"`, `"beta"`, and the input.
pub fn batchnorm_backward<T: Scalar>(
    gamma: &Tensor<T>,
    cache: &BatchNormCache<T>,
    output_grad: &Tensor<T>,
) -> Result<LayerGradients<T>> {
    cache.normalized.expect_same_shape("batchnorm_backward", output_grad)?;
    let c = gamma.len();
    let dy = output_grad.data();
    let xhat = cache.normalized.data();

    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (g, h) in dy.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += g[ch] * h[ch];
            dbeta[ch] += g[ch];
        }
    }

    let mut dx = Vec::with_capacity(dy.len());
    match cache.mode {
        Mode::Train => {
            let n = T::from_usize_lossy((dy.len() / c).max(1));
            for (g, h) in dy.chunks_exact(c).zip(xhat.chunks_exact(c)) {
                for ch in 0..c {
                    let scale = gamma.data()[ch] * cache.inv_std[ch] / n;
                    dx.push(scale * (n * g[ch] - dbeta[ch] - h[ch] * dgamma[ch]));
                }
            }
        }
        Mode::Infer => {
            for g in dy.chunks_exact(c) {
                for ch in 0..c {
                    dx.push(g[ch] * gamma.data()[ch] * cache.inv_std[ch]);
                }
            }
        }
    }

    Ok(
        LayerGradients::new(Tensor::new(output_grad.shape().to_vec(), dx)?)
            .with_param("gamma", Tensor::new(vec![c], dgamma)?)
            .with_param("beta", Tensor::new(vec![c], dbeta)?),
    )
}
