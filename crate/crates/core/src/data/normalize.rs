use serde::{Deserialize, Serialize};

use super::PatchDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

/// Variance below which a channel is treated as constant and only centered.
const MIN_VARIANCE: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    /// Divisor applied after centering; `1` for constant channels.
    pub scale: Vec<f64>,
}

impl ChannelStats {
    /// Standardizes every value of a channel-last tensor in place.
    pub fn apply<T: Scalar>(&self, t: &mut Tensor<T>) -> Result<()> {
        let c = self.mean.len();
        if t.shape().last() != Some(&c) {
            return Err(Error::shape("normalize", format!("{:?} does not end in {c} channels", t.shape())));
        }
        for px in t.data_mut().chunks_exact_mut(c) {
            for ((v, m), s) in px.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = T::from_f64_lossy((v.to_f64_lossy() - m) / s);
            }
        }
        Ok(())
    }
}

/// Per-channel standardization with statistics from the labeled and
/// candidate pools only; the test set is transformed but never measured.
pub fn normalize_channels<T: Scalar>(mut dataset: PatchDataset<T>) -> Result<(PatchDataset<T>, ChannelStats)> {
    let pool: Vec<usize> = dataset
        .split
        .labeled
        .iter()
        .chain(&dataset.split.candidates)
        .copied()
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidArgument("normalization needs a nonempty labeled or candidate pool".into()));
    }
    let [h, w, c] = dataset.patch_shape();
    let per_patch = h * w * c;
    let mut sum = vec![0.0; c];
    let mut count = 0usize;
    for &i in &pool {
        for px in dataset.patches().data()[i * per_patch..(i + 1) * per_patch].chunks_exact(c) {
            for (s, v) in sum.iter_mut().zip(px) {
                *s += v.to_f64_lossy();
            }
            count += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let mut sq = vec![0.0; c];
    for &i in &pool {
        for px in dataset.patches().data()[i * per_patch..(i + 1) * per_patch].chunks_exact(c) {
            for ((s, v), m) in sq.iter_mut().zip(px).zip(&mean) {
                let d = v.to_f64_lossy() - m;
                *s += d * d;
            }
        }
    }
    let scale = sq
        .iter()
        .map(|s| {
            let var = s / count as f64;
            if var > MIN_VARIANCE {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let stats = ChannelStats { mean, scale };
    stats.apply(dataset.patches_mut())?;
    Ok((dataset, stats))
}
