use super::LayerGradients;
use crate::error::{Error, Result};
use crate::scalar::{gemm, Scalar};
use crate::Tensor;

/// Collapses every axis after the first: `N x ... -> N x D`.
pub fn flatten<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let n = *input
        .shape()
        .first()
        .ok_or_else(|| Error::shape("flatten", "rank-0 input"))?;
    let d = input.len() / n.max(1);
    input.clone().reshape(vec![n, d])
}

fn dims<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (n, d) = match *input.shape() {
        [d] => (1, d),
        [n, d] => (n, d),
        _ => return Err(Error::shape("dense", format!("input must be D or N x D, got {:?}", input.shape()))),
    };
    match *weights.shape() {
        [wd, o] if wd == d => Ok((n, d, o)),
        _ => Err(Error::shape(
            "dense",
            format!("input width D = {d} but weights are {:?}", weights.shape()),
        )),
    }
}

/// Affine map `y = x W + b` with `W` of shape `D x O`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, d, o) = dims(input, weights)?;
    if bias.len() != o {
        return Err(Error::shape("dense", format!("bias length {} but O = {o}", bias.len())));
    }
    let mut out = Vec::with_capacity(n * o);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(false, false, n, d, o, input.data(), weights.data(), T::one(), &mut out);
    let shape = if input.rank() == 1 { vec![o] } else { vec![n, o] };
    Tensor::new(shape, out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    output_grad: &Tensor<T>,
) -> Result<LayerGradients<T>> {
    let (n, d, o) = dims(input, weights)?;
    if output_grad.len() != n * o {
        return Err(Error::shape(
            "dense_backward",
            format!("output grad {:?} for {n} x {o} output", output_grad.shape()),
        ));
    }
    let dy = output_grad.data();
    let mut dw = vec![T::zero(); d * o];
    gemm(true, false, d, n, o, input.data(), dy, T::zero(), &mut dw);
    let mut db = vec![T::zero(); o];
    for r in dy.chunks_exact(o) {
        for (a, &v) in db.iter_mut().zip(r) {
            *a += v;
        }
    }
    let mut dx = vec![T::zero(); n * d];
    gemm(false, true, n, o, d, dy, weights.data(), T::zero(), &mut dx);
    Ok(LayerGradients::new(Tensor::new(input.shape().to_vec(), dx)?)
        .with_param("weight", Tensor::new(vec![d, o], dw)?)
        .with_param("bias", Tensor::new(vec![o], db)?))
}
