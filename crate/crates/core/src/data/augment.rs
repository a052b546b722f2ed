use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mirror {
    /// Reverses columns: `[[1, 2], [3, 4]] -> [[2, 1], [4, 3]]`.
    Horizontal,
    /// Reverses rows: `[[1, 2], [3, 4]] -> [[3, 4], [1, 2]]`.
    Vertical,
    /// Transposes across the main diagonal: `[[1, 2], [3, 4]] -> [[1, 3], [2, 4]]`.
    Diagonal,
}

/// Mirrors every patch of an `N x S x S x C` tensor.
pub fn mirror<T: Scalar>(patches: &Tensor<T>, axis: Mirror) -> Result<Tensor<T>> {
    let (n, h, w, c) = match *patches.shape() {
        [n, h, w, c] => (n, h, w, c),
        _ => return Err(Error::shape("mirror", format!("expected N x H x W x C, got {:?}", patches.shape()))),
    };
    if h != w {
        return Err(Error::shape("mirror", format!("patches must be square, got {h} x {w}")));
    }
    let src = patches.data();
    let mut out = Vec::with_capacity(src.len());
    for b in 0..n {
        for i in 0..h {
            for j in 0..w {
                let (si, sj) = match axis {
                    Mirror::Horizontal => (i, w - 1 - j),
                    Mirror::Vertical => (h - 1 - i, j),
                    Mirror::Diagonal => (j, i),
                };
                let at = ((b * h + si) * w + sj) * c;
                out.extend_from_slice(&src[at..at + c]);
            }
        }
    }
    Tensor::new(patches.shape().to_vec(), out)
}

/// Four views of each patch: the original block, then its horizontal,
/// vertical, and diagonal mirrors, each as a contiguous block of `N`.
/// Labels are repeated to match.
pub fn augment_mirror<T: Scalar>(patches: &Tensor<T>, labels: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
    let n = patches.shape().first().copied().unwrap_or(0);
    if labels.len() != n {
        return Err(Error::shape("augment_mirror", format!("{} labels for {n} patches", labels.len())));
    }
    let views = [
        mirror(patches, Mirror::Horizontal)?,
        mirror(patches, Mirror::Vertical)?,
        mirror(patches, Mirror::Diagonal)?,
    ];
    let mut data = Vec::with_capacity(patches.len() * 4);
    data.extend_from_slice(patches.data());
    for v in &views {
        data.extend_from_slice(v.data());
    }
    let mut shape = patches.shape().to_vec();
    shape[0] = 4 * n;
    let all_labels = labels.iter().copied().cycle().take(4 * n).collect();
    Ok((Tensor::new(shape, data)?, all_labels))
}
