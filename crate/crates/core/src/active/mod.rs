//! Candidate scoring and selection: random sampling, maximum entropy,
//! breaking ties, and their snapshot-committee variants, plus a measure of
//! how much committee members disagree.

mod agreement;
mod committee;
mod probs;
mod scores;
mod select;

pub use agreement::{agreement_histogram, AgreementHistogram};
pub use committee::{
    combine_probabilities, ensemble_probabilities, member_probabilities, select_aedl, SnapshotCommittee,
};
pub(crate) use committee::INFERENCE_CHUNK;
pub use probs::{ProbabilityMatrix, ROW_SUM_TOLERANCE};
pub use scores::{score_bt_margin, score_entropy};
pub use select::{select, select_by_uncertainty, select_random, Criterion, SelectionResult, Strategy};
