use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{PatchDataset, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Draws a stratified labeled seed of exactly `per_class` instances per class,
/// then uniformly samples the candidate pool and the test set from the rest.
pub fn seed_split<T: Scalar>(
    dataset: PatchDataset<T>,
    per_class: usize,
    candidate_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<PatchDataset<T>> {
    let k = dataset.class_count();
    let needed = per_class * k + candidate_size + test_size;
    if needed > dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "split needs {needed} instances ({per_class} x {k} seed + {candidate_size} candidates + {test_size} test), dataset has {}",
            dataset.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut labeled = BTreeSet::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < per_class {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} instances, fewer than the {per_class} required for the labeled seed",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        labeled.extend(members.iter().take(per_class).copied());
    }
    let mut rest: Vec<usize> = (0..dataset.len()).filter(|i| !labeled.contains(i)).collect();
    rest.shuffle(&mut rng);
    let candidates = rest[..candidate_size].iter().copied().collect();
    let test = rest[candidate_size..candidate_size + test_size].iter().copied().collect();
    dataset.with_split(Split {
        labeled,
        candidates,
        test,
    })
}
