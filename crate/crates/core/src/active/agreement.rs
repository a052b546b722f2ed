use std::collections::HashMap;

use crate::error::{Error, Result};

/// Distribution of the modal-label multiplicity across instances.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementHistogram {
    pub member_count: usize,
    /// `counts[m]` is the number of instances whose most common predicted
    /// label was produced by exactly `m` members. Length `member_count + 1`.
    pub counts: Vec<usize>,
}

impl AgreementHistogram {
    pub fn instances(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Share of instances on which every member agreed.
    pub fn full_agreement_fraction(&self) -> f64 {
        self.fraction(|m| m == self.member_count)
    }

    /// Share of instances whose majority covers strictly less than
    /// `share` of the members.
    pub fn fraction_below(&self, share: f64) -> f64 {
        let n = self.member_count as f64;
        self.fraction(|m| (m as f64) < share * n)
    }

    fn fraction(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let total = self.instances();
        if total == 0 {
            return 0.0;
        }
        let hit: usize = self.counts.iter().enumerate().filter(|&(m, _)| keep(m)).map(|(_, &c)| c).sum();
        hit as f64 / total as f64
    }
}

/// Tallies, per instance, how many of the `n` members voted for the modal
/// label. `member_predictions[j][i]` is member `j`'s label for instance `i`.
/// Tied modes are counted at the tied multiplicity.
pub fn agreement_histogram(member_predictions: &[Vec<usize>]) -> Result<AgreementHistogram> {
    let n = member_predictions.len();
    let first = member_predictions
        .first()
        .ok_or_else(|| Error::InvalidArgument("agreement needs at least one member".into()))?;
    for (j, p) in member_predictions.iter().enumerate() {
        if p.len() != first.len() {
            return Err(Error::shape(
                "agreement_histogram",
                format!("member {j} predicts {} instances, member 0 predicts {}", p.len(), first.len()),
            ));
        }
    }
    let mut counts = vec![0; n + 1];
    let mut votes: HashMap<usize, usize> = HashMap::new();
    for i in 0..first.len() {
        votes.clear();
        for p in member_predictions {
            *votes.entry(p[i]).or_default() += 1;
        }
        let modal = votes.values().copied().max().unwrap_or(0);
        counts[modal] += 1;
    }
    Ok(AgreementHistogram { member_count: n, counts })
}
