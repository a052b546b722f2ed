use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::active::Strategy;
use crate::data::{generate_synthetic, PatchDataset, SyntheticSpec};
use crate::engine::AdamConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::zoo::Architecture;

/// Where the patches come from: a `PSAR` file or an inline synthetic recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetSource {
    pub fn load<T: Scalar>(&self) -> Result<PatchDataset<T>> {
        match (&self.path, &self.synthetic) {
            (Some(path), None) => PatchDataset::load(path),
            (None, Some(spec)) => generate_synthetic(spec),
            _ => Err(Error::Config("dataset needs exactly one of `path` or `synthetic`".into())),
        }
    }
}

/// Full description of one active-learning experiment. Parsed from TOML;
/// every field except `dataset`, `network`, `strategy`, `candidate_size`
/// and `test_size` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub network: Architecture,
    pub strategy: Strategy,
    #[serde(default = "defaults::per_class_seed")]
    pub per_class_seed: usize,
    pub candidate_size: usize,
    pub test_size: usize,
    #[serde(default = "defaults::batch_per_round")]
    pub batch_per_round: usize,
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    #[serde(default = "defaults::initial_epochs")]
    pub initial_epochs: usize,
    #[serde(default = "defaults::finetune_epochs")]
    pub finetune_epochs: usize,
    #[serde(default = "defaults::snapshot_interval_epochs")]
    pub snapshot_interval_epochs: usize,
    #[serde(default = "defaults::committee_size")]
    pub committee_size: usize,
    #[serde(default = "defaults::monte_carlo_runs")]
    pub monte_carlo_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Explicit per-run seeds; when absent run `i` uses `base_seed + i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "defaults::train_batch_size")]
    pub train_batch_size: usize,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default = "defaults::yes")]
    pub augment: bool,
    #[serde(default = "defaults::yes")]
    pub normalize: bool,
    /// Fill the `wall_time_s` column. Off by default so result files are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn per_class_seed() -> usize {
        5
    }
    pub fn batch_per_round() -> usize {
        5
    }
    pub fn rounds() -> usize {
        10
    }
    pub fn initial_epochs() -> usize {
        100
    }
    pub fn finetune_epochs() -> usize {
        30
    }
    pub fn snapshot_interval_epochs() -> usize {
        2
    }
    pub fn committee_size() -> usize {
        9
    }
    pub fn monte_carlo_runs() -> usize {
        10
    }
    pub fn train_batch_size() -> usize {
        32
    }
    pub fn yes() -> bool {
        true
    }
    pub fn output_dir() -> PathBuf {
        PathBuf::from("results")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        match (&self.dataset.path, &self.dataset.synthetic) {
            (Some(_), None) => {}
            (None, Some(spec)) => spec.validate()?,
            _ => return fail("dataset needs exactly one of `path` or `synthetic`".into()),
        }
        let positive = [
            ("per_class_seed", self.per_class_seed),
            ("candidate_size", self.candidate_size),
            ("test_size", self.test_size),
            ("batch_per_round", self.batch_per_round),
            ("initial_epochs", self.initial_epochs),
            ("finetune_epochs", self.finetune_epochs),
            ("snapshot_interval_epochs", self.snapshot_interval_epochs),
            ("committee_size", self.committee_size),
            ("monte_carlo_runs", self.monte_carlo_runs),
            ("train_batch_size", self.train_batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be positive"));
        }
        self.check_committee_size(self.committee_size)?;
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.monte_carlo_runs {
                return fail(format!(
                    "{} seeds listed for {} Monte Carlo runs",
                    seeds.len(),
                    self.monte_carlo_runs
                ));
            }
        }
        self.optimizer.validate()
    }

    /// A committee of `size` snapshots spaced `snapshot_interval_epochs`
    /// apart must fit inside one fine-tuning phase.
    pub fn check_committee_size(&self, size: usize) -> Result<()> {
        if size == 0 || size * self.snapshot_interval_epochs > self.finetune_epochs {
            return Err(Error::Config(format!(
                "committee size {size} x snapshot interval {} exceeds finetune_epochs {}",
                self.snapshot_interval_epochs, self.finetune_epochs
            )));
        }
        Ok(())
    }

    pub fn resolved_seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| {
            (0..self.monte_carlo_runs as u64)
                .map(|i| self.base_seed.wrapping_add(i))
                .collect()
        })
    }

    /// Stable 64-bit FNV-1a digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
