use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PatchDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

/// Texture parameters of one synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTexture {
    /// Per-channel mean backscatter.
    pub mean: Vec<f64>,
    /// Variance of the additive Gaussian field around the mean.
    pub covariance_scale: f64,
    /// Log-domain standard deviation of the multiplicative speckle.
    pub speckle: f64,
}

/// Recipe for a reproducible PolSAR-like patch dataset.
///
/// Each pixel value is `(mean[c] + sqrt(covariance_scale) * g) * s`, where
/// `g` mixes a patch-wide Gaussian draw (weight `spatial_correlation`) with
/// a per-pixel one, and `s = exp(speckle * z - speckle^2 / 2)` is a unit-mean
/// log-normal speckle factor shared by all channels of a pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub instances_per_class: usize,
    pub seed: u64,
    #[serde(default = "default_correlation")]
    pub spatial_correlation: f64,
    pub classes: Vec<ClassTexture>,
}

fn default_correlation() -> f64 {
    0.5
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.class_count < 2 {
            return fail(format!("class_count {} < 2", self.class_count));
        }
        if self.patch_size == 0 || self.channels == 0 || self.instances_per_class == 0 {
            return fail("patch_size, channels and instances_per_class must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.spatial_correlation) {
            return fail(format!("spatial_correlation {} outside [0, 1]", self.spatial_correlation));
        }
        if self.classes.len() != self.class_count {
            return fail(format!("{} class textures for {} classes", self.classes.len(), self.class_count));
        }
        for (k, c) in self.classes.iter().enumerate() {
            if c.mean.len() != self.channels {
                return fail(format!("class {k} mean has {} channels, expected {}", c.mean.len(), self.channels));
            }
            if c.covariance_scale.is_nan() || c.covariance_scale <= 0.0 {
                return fail(format!("class {k} covariance_scale must be > 0"));
            }
            if c.speckle.is_nan() || c.speckle < 0.0 {
                return fail(format!("class {k} speckle must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Classes with means scattered around a common backscatter level.
    ///
    /// Means are drawn per channel as `base + separation * N(0, 1)`, shifted
    /// to stay positive; every class shares `covariance_scale` and `speckle`.
    #[allow(clippy::too_many_arguments)]
    pub fn scattered(
        class_count: usize,
        patch_size: usize,
        channels: usize,
        instances_per_class: usize,
        separation: f64,
        covariance_scale: f64,
        speckle: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1a5);
        let base = 1.0 + 3.0 * separation;
        let classes = (0..class_count)
            .map(|_| ClassTexture {
                mean: (0..channels)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (base + separation * z).max(0.05)
                    })
                    .collect(),
                covariance_scale,
                speckle,
            })
            .collect();
        Self {
            class_count,
            patch_size,
            channels,
            instances_per_class,
            seed,
            spatial_correlation: default_correlation(),
            classes,
        }
    }
}

/// Generates `instances_per_class` patches per class, interleaved by class.
/// The output is a pure function of the spec.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<PatchDataset<T>> {
    spec.validate()?;
    let (k, p, c) = (spec.class_count, spec.patch_size, spec.channels);
    let n = k * spec.instances_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared_w = spec.spatial_correlation.sqrt();
    let own_w = (1.0 - spec.spatial_correlation).sqrt();
    let mut data = Vec::with_capacity(n * p * p * c);
    let mut labels = Vec::with_capacity(n);
    let mut shared = vec![0.0; c];
    for _ in 0..spec.instances_per_class {
        for (label, tex) in spec.classes.iter().enumerate() {
            let sd = tex.covariance_scale.sqrt();
            for v in shared.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for _ in 0..p * p {
                let z: f64 = rng.sample(StandardNormal);
                let speckle = (tex.speckle * z - 0.5 * tex.speckle * tex.speckle).exp();
                for ch in 0..c {
                    let own: f64 = rng.sample(StandardNormal);
                    let field = shared_w * shared[ch] + own_w * own;
                    data.push(T::from_f64_lossy((tex.mean[ch] + sd * field) * speckle));
                }
            }
            labels.push(label);
        }
    }
    PatchDataset::new(Tensor::new(vec![n, p, p, c], data)?, labels, k)
}
