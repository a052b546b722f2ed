use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{score_bt_margin, score_entropy, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Random,
    MaxEntropy,
    BreakingTies,
}

/// A configured query strategy. The `Aedl*` variants rank with the snapshot
/// committee's averaged probabilities instead of a single model's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "rs")]
    Random,
    #[serde(rename = "me")]
    MaxEntropy,
    #[serde(rename = "bt")]
    BreakingTies,
    #[serde(rename = "aedl-me")]
    AedlMaxEntropy,
    #[serde(rename = "aedl-bt")]
    AedlBreakingTies,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::MaxEntropy,
        Strategy::BreakingTies,
        Strategy::AedlMaxEntropy,
        Strategy::AedlBreakingTies,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "rs",
            Strategy::MaxEntropy => "me",
            Strategy::BreakingTies => "bt",
            Strategy::AedlMaxEntropy => "aedl-me",
            Strategy::AedlBreakingTies => "aedl-bt",
        }
    }

    pub fn criterion(self) -> Criterion {
        match self {
            Strategy::Random => Criterion::Random,
            Strategy::MaxEntropy | Strategy::AedlMaxEntropy => Criterion::MaxEntropy,
            Strategy::BreakingTies | Strategy::AedlBreakingTies => Criterion::BreakingTies,
        }
    }

    pub fn uses_committee(self) -> bool {
        matches!(self, Strategy::AedlMaxEntropy | Strategy::AedlBreakingTies)
    }

    /// The single-model strategy with the same criterion.
    pub fn standard(self) -> Strategy {
        match self {
            Strategy::AedlMaxEntropy => Strategy::MaxEntropy,
            Strategy::AedlBreakingTies => Strategy::BreakingTies,
            s => s,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?} (expected rs, me, bt, aedl-me, aedl-bt)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult<T> {
    /// Chosen candidate ids, most informative first.
    pub chosen_ids: Vec<usize>,
    /// Score of every candidate in input order; empty for random selection.
    pub scores: Vec<T>,
}

/// Uniform sampling of `batch` candidates without replacement.
pub fn select_random<T: Scalar>(candidates: &[usize], batch: usize, seed: u64) -> Result<SelectionResult<T>> {
    check_batch(batch)?;
    let take = batch.min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen_ids = rand::seq::index::sample(&mut rng, candidates.len(), take)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    Ok(SelectionResult {
        chosen_ids,
        scores: Vec::new(),
    })
}

/// Top-`batch` by entropy (descending) or bottom-`batch` by margin
/// (ascending). Equal scores are ordered by ascending instance id.
pub fn select_by_uncertainty<T: Scalar>(
    criterion: Criterion,
    probs: &ProbabilityMatrix<T>,
    batch: usize,
) -> Result<SelectionResult<T>> {
    check_batch(batch)?;
    let (scores, descending) = match criterion {
        Criterion::MaxEntropy => (score_entropy(probs), true),
        Criterion::BreakingTies => (score_bt_margin(probs), false),
        Criterion::Random => {
            return Err(Error::InvalidArgument("random selection does not rank by uncertainty".into()))
        }
    };
    let ids = probs.instance_ids();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal);
        let by_score = if descending { by_score.reverse() } else { by_score };
        by_score.then(ids[a].cmp(&ids[b]))
    });
    let chosen_ids = order.into_iter().take(batch).map(|i| ids[i]).collect();
    Ok(SelectionResult { chosen_ids, scores })
}

/// Dispatches on `criterion`. Random selection draws from `candidates`;
/// the uncertainty criteria require `probs`.
pub fn select<T: Scalar>(
    criterion: Criterion,
    candidates: &[usize],
    probs: Option<&ProbabilityMatrix<T>>,
    batch: usize,
    seed: u64,
) -> Result<SelectionResult<T>> {
    match (criterion, probs) {
        (Criterion::Random, _) => select_random(candidates, batch, seed),
        (_, Some(p)) => select_by_uncertainty(criterion, p, batch),
        (_, None) => Err(Error::InvalidArgument(format!("{criterion:?} selection needs class probabilities"))),
    }
}

fn check_batch(batch: usize) -> Result<()> {
    if batch == 0 {
        Err(Error::InvalidArgument("selection batch size must be at least 1".into()))
    } else {
        Ok(())
    }
}
