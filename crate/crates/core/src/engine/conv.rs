use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{batch_view, restore_rank, LayerGradients};
use crate::error::{Error, Result};
use crate::scalar::{gemm, Scalar};
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// No padding; the output shrinks by `kernel - 1`.
    #[default]
    Valid,
    /// Zero-fill so the output keeps the input's spatial size.
    Same,
}

/// Resolved geometry of one convolution call.
#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    batch: usize,
    height: usize,
    width: usize,
    in_channels: usize,
    kernel_h: usize,
    kernel_w: usize,
    filters: usize,
    out_h: usize,
    out_w: usize,
    pad_top: usize,
    pad_left: usize,
}

impl ConvGeometry {
    fn resolve<T: Scalar>(
        input: &Tensor<T>,
        weights: &Tensor<T>,
        padding: Padding,
    ) -> Result<(Self, bool)> {
        let (batch, height, width, in_channels, single) = batch_view("conv2d", input)?;
        if weights.rank() != 4 {
            return Err(Error::shape(
                "conv2d",
                format!("weights must be P x Q x M x K, got {:?}", weights.shape()),
            ));
        }
        let (kernel_h, kernel_w, wm, filters) = (
            weights.shape()[0],
            weights.shape()[1],
            weights.shape()[2],
            weights.shape()[3],
        );
        if wm != in_channels {
            return Err(Error::shape(
                "conv2d",
                format!("input channels M = {in_channels} but weights expect {wm}"),
            ));
        }
        let (out_h, out_w, pad_top, pad_left) = match padding {
            Padding::Valid => {
                if kernel_h > height {
                    return Err(Error::shape(
                        "conv2d",
                        format!("kernel height P = {kernel_h} exceeds input height H = {height}"),
                    ));
                }
                if kernel_w > width {
                    return Err(Error::shape(
                        "conv2d",
                        format!("kernel width Q = {kernel_w} exceeds input width W = {width}"),
                    ));
                }
                (height - kernel_h + 1, width - kernel_w + 1, 0, 0)
            }
            Padding::Same => (height, width, (kernel_h - 1) / 2, (kernel_w - 1) / 2),
        };
        Ok((
            Self {
                batch,
                height,
                width,
                in_channels,
                kernel_h,
                kernel_w,
                filters,
                out_h,
                out_w,
                pad_top,
                pad_left,
            },
            single,
        ))
    }

    fn rows(&self) -> usize {
        self.batch * self.out_h * self.out_w
    }

    fn patch_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1
    }

    /// Source pixel for output `(i, j)` and kernel tap `(p, q)`, if inside the input.
    #[inline]
    fn source(&self, i: usize, j: usize, p: usize, q: usize) -> Option<(usize, usize)> {
        let y = (i + p).checked_sub(self.pad_top)?;
        let x = (j + q).checked_sub(self.pad_left)?;
        (y < self.height && x < self.width).then_some((y, x))
    }
}

/// Unrolls every receptive field into one row, ordered `(p, q, m)` to match
/// the `P x Q x M x K` weight layout.
fn im2col<'a, T: Scalar>(input: &'a [T], g: &ConvGeometry) -> Cow<'a, [T]> {
    if g.is_pointwise() {
        return Cow::Borrowed(input);
    }
    let m = g.in_channels;
    let mut cols = vec![T::zero(); g.rows() * g.patch_len()];
    let mut row = 0;
    for n in 0..g.batch {
        let image = &input[n * g.height * g.width * m..(n + 1) * g.height * g.width * m];
        for i in 0..g.out_h {
            for j in 0..g.out_w {
                let dst = &mut cols[row * g.patch_len()..(row + 1) * g.patch_len()];
                for p in 0..g.kernel_h {
                    for q in 0..g.kernel_w {
                        if let Some((y, x)) = g.source(i, j, p, q) {
                            let at = (p * g.kernel_w + q) * m;
                            let src = (y * g.width + x) * m;
                            dst[at..at + m].copy_from_slice(&image[src..src + m]);
                        }
                    }
                }
                row += 1;
            }
        }
    }
    Cow::Owned(cols)
}

fn col2im<T: Scalar>(cols: &[T], g: &ConvGeometry) -> Vec<T> {
    if g.is_pointwise() {
        return cols.to_vec();
    }
    let m = g.in_channels;
    let mut out = vec![T::zero(); g.batch * g.height * g.width * m];
    let mut row = 0;
    for n in 0..g.batch {
        let image = &mut out[n * g.height * g.width * m..(n + 1) * g.height * g.width * m];
        for i in 0..g.out_h {
            for j in 0..g.out_w {
                let src = &cols[row * g.patch_len()..(row + 1) * g.patch_len()];
                for p in 0..g.kernel_h {
                    for q in 0..g.kernel_w {
                        if let Some((y, x)) = g.source(i, j, p, q) {
                            let at = (p * g.kernel_w + q) * m;
                            let dst = (y * g.width + x) * m;
                            for c in 0..m {
                                image[dst + c] += src[at + c];
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
    out
}

/// 2-D cross-correlation over an `H x W x M` image (or an `N x H x W x M`
/// batch) with `P x Q x M x K` weights:
/// `y[i, j, k] = b[k] + sum_{p, q, m} w[p, q, m, k] * x[i + p, j + q, m]`.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
) -> Result<Tensor<T>> {
    let (g, single) = ConvGeometry::resolve(input, weights, padding)?;
    if bias.len() != g.filters {
        return Err(Error::shape(
            "conv2d",
            format!("bias length {} but K = {}", bias.len(), g.filters),
        ));
    }
    let cols = im2col(input.data(), &g);
    let mut out = Vec::with_capacity(g.rows() * g.filters);
    for _ in 0..g.rows() {
        out.extend_from_slice(bias.data());
    }
    gemm(
        false,
        false,
        g.rows(),
        g.patch_len(),
        g.filters,
        &cols,
        weights.data(),
        T::one(),
        &mut out,
    );
    let t = Tensor::new(vec![g.batch, g.out_h, g.out_w, g.filters], out)?;
    Ok(restore_rank(t, single))
}

/// Gradients of [`conv2d_forward`] with respect to weights (`"weight"`),
/// bias (`"bias"`), and input.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    output_grad: &Tensor<T>,
    padding: Padding,
) -> Result<LayerGradients<T>> {
    let (g, single) = ConvGeometry::resolve(input, weights, padding)?;
    let expected = if single {
        vec![g.out_h, g.out_w, g.filters]
    } else {
        vec![g.batch, g.out_h, g.out_w, g.filters]
    };
    if output_grad.shape() != expected.as_slice() {
        return Err(Error::shape(
            "conv2d_backward",
            format!("output grad {:?}, expected {:?}", output_grad.shape(), expected),
        ));
    }
    let dy = output_grad.data();
    let cols = im2col(input.data(), &g);

    let mut dw = vec![T::zero(); g.patch_len() * g.filters];
    gemm(true, false, g.patch_len(), g.rows(), g.filters, &cols, dy, T::zero(), &mut dw);

    let mut db = vec![T::zero(); g.filters];
    for r in dy.chunks_exact(g.filters) {
        for (acc, &v) in db.iter_mut().zip(r) {
            *acc += v;
        }
    }

    let mut dcols = vec![T::zero(); g.rows() * g.patch_len()];
    gemm(false, true, g.rows(), g.filters, g.patch_len(), dy, weights.data(), T::zero(), &mut dcols);
    let dx = Tensor::new(input.shape().to_vec(), col2im(&dcols, &g))?;

    Ok(LayerGradients::new(dx)
        .with_param("weight", Tensor::new(weights.shape().to_vec(), dw)?)
        .with_param("bias", Tensor::new(vec![g.filters], db)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation over the correlation indices, independent of im2col.
    fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, padding: Padding) -> Tensor<f64> {
        let (h, wd, m) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (p, q, k) = (w.shape()[0], w.shape()[1], w.shape()[3]);
        let (oh, ow, pt, pl) = match padding {
            Padding::Valid => (h - p + 1, wd - q + 1, 0isize, 0isize),
            Padding::Same => (h, wd, ((p - 1) / 2) as isize, ((q - 1) / 2) as isize),
        };
        let mut out = Tensor::zeros(vec![oh, ow, k]);
        for i in 0..oh {
            for j in 0..ow {
                for f in 0..k {
                    let mut s = b.data()[f];
                    for c in 0..m {
                        for di in 0..p {
                            for dj in 0..q {
                                let y = i as isize + di as isize - pt;
                                let xx = j as isize + dj as isize - pl;
                                if y >= 0 && xx >= 0 && (y as usize) < h && (xx as usize) < wd {
                                    s += w.get(&[di, dj, c, f]) * x.get(&[y as usize, xx as usize, c]);
                                }
                            }
                        }
                    }
                    out.set(&[i, j, f], s);
                }
            }
        }
        out
    }

    #[test]
    fn scalar_multiply_add() {
        let x = Tensor::new(vec![1, 1, 1], vec![3.0]).unwrap();
        let w = Tensor::new(vec![1, 1, 1, 1], vec![2.0]).unwrap();
        let b = Tensor::from_vec(vec![1.0]);
        let y = conv2d_forward(&x, &w, &b, Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[7.0]);

        let dy = Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let grads = conv2d_backward(&x, &w, &dy, Padding::Valid).unwrap();
        assert_eq!(grads.param("weight").unwrap().data(), &[3.0]);
        assert_eq!(grads.param("bias").unwrap().data(), &[1.0]);
        assert_eq!(grads.input_grad.data(), &[2.0]);
    }

    #[test]
    fn ones_kernel_sums_window() {
        let x = Tensor::filled(vec![3, 3, 1], 1.0);
        let w = Tensor::filled(vec![3, 3, 1, 1], 1.0);
        let b = Tensor::from_vec(vec![0.0]);
        let y = conv2d_forward(&x, &w, &b, Padding::Valid).unwrap();
        let want = conv_oracle(&x, &w, &b, Padding::Valid);
        assert_eq!(want.data(), &[9.0]);
        assert_eq!(y.data(), want.data());
    }

    #[test]
    fn zero_weights_emit_bias() {
        let x = Tensor::from_fn(vec![4, 4, 2], |i| (i as f64).cos());
        let w = Tensor::zeros(vec![3, 3, 2, 3]);
        let b = Tensor::from_vec(vec![0.5, -1.0, 2.0]);
        for padding in [Padding::Valid, Padding::Same] {
            let y = conv2d_forward(&x, &w, &b, padding).unwrap();
            for px in y.data().chunks(3) {
                assert_eq!(px, b.data());
            }
        }
    }

    #[test]
    fn identity_pointwise_kernel_is_identity() {
        let x = Tensor::from_fn(vec![2, 3, 3, 4], |i| (i as f64 * 0.37).sin());
        let w = Tensor::from_fn(vec![1, 1, 4, 4], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        let b = Tensor::zeros(vec![4]);
        let y = conv2d_forward(&x, &w, &b, Padding::Valid).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_direct_summation() {
        let x = Tensor::from_fn(vec![5, 6, 3], |i| ((i * 7 % 11) as f64) * 0.1 - 0.5);
        let w = Tensor::from_fn(vec![3, 2, 3, 4], |i| ((i * 5 % 13) as f64) * 0.07 - 0.4);
        let b = Tensor::from_vec(vec![0.1, -0.2, 0.3, 0.0]);
        for padding in [Padding::Valid, Padding::Same] {
            let got = conv2d_forward(&x, &w, &b, padding).unwrap();
            let want = conv_oracle(&x, &w, &b, padding);
            assert_eq!(got.shape(), want.shape());
            for (a, e) in got.data().iter().zip(want.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_padding_keeps_spatial_size() {
        let x = Tensor::<f64>::zeros(vec![7, 7, 6]);
        let w = Tensor::zeros(vec![3, 3, 6, 64]);
        let y = conv2d_forward(&x, &w, &Tensor::zeros(vec![64]), Padding::Same).unwrap();
        assert_eq!(y.shape(), &[7, 7, 64]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let x = Tensor::from_fn(vec![4, 4, 2], |i| i as f64);
        let w = Tensor::from_fn(vec![3, 3, 2, 2], |i| i as f64 * 0.1);
        let dy = Tensor::zeros(vec![2, 2, 2]);
        let g = conv2d_backward(&x, &w, &dy, Padding::Valid).unwrap();
        assert!(g.input_grad.data().iter().all(|&v| v == 0.0));
        assert!(g.param("weight").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.param("bias").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_channel_mismatch_naming_dimension() {
        let x = Tensor::<f64>::zeros(vec![5, 5, 3]);
        let w = Tensor::zeros(vec![3, 3, 2, 1]);
        let err = conv2d_forward(&x, &w, &Tensor::zeros(vec![1]), Padding::Valid).unwrap_err();
        assert!(err.to_string().contains("input channels M"), "{err}");
    }

    #[test]
    fn rejects_oversized_kernel() {
        let x = Tensor::<f64>::zeros(vec![2, 5, 1]);
        let w = Tensor::zeros(vec![3, 3, 1, 1]);
        let err = conv2d_forward(&x, &w, &Tensor::zeros(vec![1]), Padding::Valid).unwrap_err();
        assert!(err.to_string().contains("kernel height P"), "{err}");
    }

    #[test]
    fn rejects_wrong_output_grad_shape() {
        let x = Tensor::<f64>::zeros(vec![5, 5, 1]);
        let w = Tensor::zeros(vec![3, 3, 1, 1]);
        let dy = Tensor::zeros(vec![5, 5, 1]);
        assert!(conv2d_backward(&x, &w, &dy, Padding::Valid).is_err());
    }
}
