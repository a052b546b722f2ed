use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(input: &Tensor<T>, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
    input.zip_map(output_grad, |x, g| if x > T::zero() { g } else { T::zero() })
}

pub fn residual_add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.zip_map(b, |x, y| x + y)
}

/// Both summands receive the incoming gradient unchanged.
pub fn residual_add_backward<T: Scalar>(output_grad: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    (output_grad.clone(), output_grad.clone())
}

/// Joins tensors along `axis`; all other axes must agree.
pub fn concatenate<T: Scalar>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concatenate", "no inputs"))?;
    let rank = first.rank();
    if axis >= rank {
        return Err(Error::shape("concatenate", format!("axis {axis} out of range for rank {rank}")));
    }
    for (i, p) in parts.iter().enumerate().skip(1) {
        let conforms = p.rank() == rank
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(ax, (a, b))| ax == axis || a == b);
        if !conforms {
            return Err(Error::shape(
                "concatenate",
                format!("input {i} has shape {:?}, incompatible with {:?} off axis {axis}", p.shape(), first.shape()),
            ));
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let total_axis: usize = parts.iter().map(|p| p.shape()[axis]).sum();
    let mut data = Vec::with_capacity(outer * total_axis * inner);
    for o in 0..outer {
        for p in parts {
            let span = p.shape()[axis] * inner;
            data.extend_from_slice(&p.data()[o * span..(o + 1) * span]);
        }
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = total_axis;
    Tensor::new(shape, data)
}

/// Splits a gradient back into pieces of the given sizes along `axis`.
pub fn concatenate_backward<T: Scalar>(
    output_grad: &Tensor<T>,
    sizes: &[usize],
    axis: usize,
) -> Result<Vec<Tensor<T>>> {
    let shape = output_grad.shape();
    if axis >= shape.len() || sizes.iter().sum::<usize>() != shape[axis] {
        return Err(Error::shape(
            "concatenate_backward",
            format!("sizes {sizes:?} do not partition axis {axis} of {shape:?}"),
        ));
    }
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut pieces: Vec<Vec<T>> = sizes.iter().map(|s| Vec::with_capacity(outer * s * inner)).collect();
    let g = output_grad.data();
    let mut at = 0;
    for _ in 0..outer {
        for (piece, &s) in pieces.iter_mut().zip(sizes) {
            piece.extend_from_slice(&g[at..at + s * inner]);
            at += s * inner;
        }
    }
    pieces
        .into_iter()
        .zip(sizes)
        .map(|(data, &s)| {
            let mut sh = shape.to_vec();
            sh[axis] = s;
            Tensor::new(sh, data)
        })
        .collect()
}

/// Per-element keep scale: `0` for dropped units, `1 / (1 - rate)` for kept ones.
#[derive(Debug, Clone)]
pub struct DropoutMask<T> {
    scale: Tensor<T>,
}

impl<T: Scalar> DropoutMask<T> {
    pub fn dropped(&self) -> usize {
        self.scale.data().iter().filter(|&&v| v == T::zero()).count()
    }
}

/// Inverted dropout: each unit is zeroed with probability `rate` and the
/// survivors are rescaled so the expectation is unchanged.
pub fn dropout_forward<T: Scalar, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    rng: &mut R,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
    let scale = Tensor::from_fn(input.shape().to_vec(), |_| {
        if rng.random::<f64>() < rate {
            T::zero()
        } else {
            keep
        }
    });
    let out = input.zip_map(&scale, |x, s| x * s)?;
    Ok((out, DropoutMask { scale }))
}

pub fn dropout_backward<T: Scalar>(mask: &DropoutMask<T>, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
    output_grad.zip_map(&mask.scale, |g, s| g * s)
}
