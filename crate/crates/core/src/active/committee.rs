use std::collections::VecDeque;

use super::{select_by_uncertainty, Criterion, ProbabilityMatrix, SelectionResult};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::zoo::{predict_chunked, NetworkGraph, ParameterSet};
use crate::Tensor;

/// Rows evaluated per forward call when scoring large pools.
pub(crate) const INFERENCE_CHUNK: usize = 512;

/// Sliding window over the most recent parameter snapshots.
#[derive(Debug, Clone)]
pub struct SnapshotCommittee<T> {
    members: VecDeque<ParameterSet<T>>,
    capacity: usize,
    capture_interval_epochs: usize,
}

impl<T: Scalar> SnapshotCommittee<T> {
    pub fn new(capacity: usize, capture_interval_epochs: usize) -> Result<Self> {
        if capacity == 0 || capture_interval_epochs == 0 {
            return Err(Error::InvalidArgument(
                "committee size and capture interval must be positive".into(),
            ));
        }
        Ok(Self {
            members: VecDeque::with_capacity(capacity),
            capacity,
            capture_interval_epochs,
        })
    }

    /// Committee holding exactly the given members.
    pub fn from_members(members: Vec<ParameterSet<T>>, capture_interval_epochs: usize) -> Result<Self> {
        let mut c = Self::new(members.len().max(1), capture_interval_epochs)?;
        for m in members {
            c.push(m);
        }
        Ok(c)
    }

    /// Adds a snapshot, evicting the oldest once the window is full.
    pub fn push(&mut self, snapshot: ParameterSet<T>) {
        if self.members.len() == self.capacity {
            self.members.pop_front();
        }
        self.members.push_back(snapshot);
    }

    pub fn clear(&mut self) {
        self.members.clear();
    }

    pub fn members(&self) -> impl ExactSizeIterator<Item = &ParameterSet<T>> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn capture_interval_epochs(&self) -> usize {
        self.capture_interval_epochs
    }

    pub fn latest(&self) -> Option<&ParameterSet<T>> {
        self.members.back()
    }

    /// Whether a snapshot is taken after `epoch` (1-based) of a phase lasting
    /// `total_epochs`. Captures are aligned to the end of the phase so the final
    /// parameters are always the newest member.
    pub fn captures_at(&self, epoch: usize, total_epochs: usize) -> bool {
        epoch <= total_epochs && (total_epochs - epoch).is_multiple_of(self.capture_interval_epochs)
    }
}

/// Entrywise arithmetic mean of member probability matrices.
pub fn combine_probabilities<T: Scalar>(members: &[ProbabilityMatrix<T>]) -> Result<ProbabilityMatrix<T>> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot combine an empty committee".into()))?;
    let mut acc = first.values().clone();
    for (j, m) in members.iter().enumerate().skip(1) {
        if m.values().shape() != first.values().shape() || m.instance_ids() != first.instance_ids() {
            return Err(Error::shape(
                "ensemble",
                format!("member {j} has shape {:?}, member 0 has {:?}", m.values().shape(), first.values().shape()),
            ));
        }
        for (a, &v) in acc.data_mut().iter_mut().zip(m.values().data()) {
            *a += v;
        }
    }
    if members.len() > 1 {
        let n = T::from_usize_lossy(members.len());
        acc.data_mut().iter_mut().for_each(|a| *a /= n);
    }
    ProbabilityMatrix::new(acc, first.instance_ids().to_vec())
}

/// Per-member inference-mode probabilities over `batch`.
pub fn member_probabilities<T: Scalar>(
    graph: &NetworkGraph,
    committee: &SnapshotCommittee<T>,
    batch: &Tensor<T>,
) -> Result<Vec<ProbabilityMatrix<T>>> {
    if committee.is_empty() {
        return Err(Error::InvalidArgument("committee has no members".into()));
    }
    committee
        .members()
        .enumerate()
        .map(|(j, m)| {
            m.check_against(graph)
                .map_err(|e| Error::InvalidArgument(format!("committee member {j}: {e}")))?;
            predict_chunked(graph, m, batch, INFERENCE_CHUNK)
        })
        .collect()
}

/// Soft-vote committee probabilities: the mean of member softmax outputs.
pub fn ensemble_probabilities<T: Scalar>(
    graph: &NetworkGraph,
    committee: &SnapshotCommittee<T>,
    batch: &Tensor<T>,
) -> Result<ProbabilityMatrix<T>> {
    combine_probabilities(&member_probabilities(graph, committee, batch)?)
}

/// Uncertainty selection driven by committee probabilities. `candidate_ids`
/// label the rows of `candidates`.
pub fn select_aedl<T: Scalar>(
    criterion: Criterion,
    graph: &NetworkGraph,
    committee: &SnapshotCommittee<T>,
    candidates: &Tensor<T>,
    candidate_ids: &[usize],
    batch: usize,
) -> Result<SelectionResult<T>> {
    let probs = ensemble_probabilities(graph, committee, candidates)?.with_ids(candidate_ids.to_vec())?;
    select_by_uncertainty(criterion, &probs, batch)
}
