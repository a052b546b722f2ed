use super::{batch_view, restore_rank};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

/// Flat input offsets of each pooled maximum, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// Non-overlapping `window x window` max pooling (stride equals window, no padding).
pub fn maxpool2d<T: Scalar>(input: &Tensor<T>, window: usize) -> Result<(Tensor<T>, PoolIndices)> {
    let (n, h, w, c, single) = batch_view("maxpool2d", input)?;
    if window == 0 || window > h || window > w {
        return Err(Error::shape(
            "maxpool2d",
            format!("window {window} does not fit a {h} x {w} input"),
        ));
    }
    let (oh, ow) = (h / window, w / window);
    let x = input.data();
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut best = usize::MAX;
                    for p in 0..window {
                        for q in 0..window {
                            let at = ((b * h + i * window + p) * w + j * window + q) * c + ch;
                            // First maximum wins on ties.
                            if best == usize::MAX || x[at] > x[best] {
                                best = at;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
    }
    let t = Tensor::new(vec![n, oh, ow, c], out)?;
    Ok((
        restore_rank(t, single),
        PoolIndices {
            input_shape: input.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2d_backward<T: Scalar>(indices: &PoolIndices, output_grad: &Tensor<T>) -> Result<Tensor<T>> {
    if output_grad.len() != indices.argmax.len() {
        return Err(Error::shape(
            "maxpool2d_backward",
            format!("{} gradients for {} pooled outputs", output_grad.len(), indices.argmax.len()),
        ));
    }
    let mut dx = Tensor::zeros(indices.input_shape.clone());
    let d = dx.data_mut();
    for (&at, &g) in indices.argmax.iter().zip(output_grad.data()) {
        d[at] += g;
    }
    Ok(dx)
}

/// Per-channel spatial mean: `H x W x C -> C` or `N x H x W x C -> N x C`.
pub fn global_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w, c, single) = batch_view("global_avg_pool", input)?;
    let area = T::from_usize_lossy(h * w);
    let mut out = vec![T::zero(); n * c];
    for (b, image) in input.data().chunks_exact((h * w * c).max(1)).enumerate().take(n) {
        let acc = &mut out[b * c..(b + 1) * c];
        for px in image.chunks_exact(c) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= area);
    }
    if single {
        Tensor::new(vec![c], out)
    } else {
        Tensor::new(vec![n, c], out)
    }
}

pub fn global_avg_pool_backward<T: Scalar>(
    input_shape: &[usize],
    output_grad: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, h, w, c) = match *input_shape {
        [h, w, c] => (1, h, w, c),
        [n, h, w, c] => (n, h, w, c),
        _ => return Err(Error::shape("global_avg_pool_backward", format!("input shape {input_shape:?}"))),
    };
    if output_grad.len() != n * c {
        return Err(Error::shape(
            "global_avg_pool_backward",
            format!("expected {} gradients, got {}", n * c, output_grad.len()),
        ));
    }
    let area = T::from_usize_lossy(h * w);
    let g = output_grad.data();
    let mut dx = Vec::with_capacity(n * h * w * c);
    for b in 0..n {
        for _ in 0..h * w {
            dx.extend(g[b * c..(b + 1) * c].iter().map(|&v| v / area));
        }
    }
    Tensor::new(input_shape.to_vec(), dx)
}
