use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

/// Largest tolerated deviation of a row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// `N x K` row-stochastic class probabilities, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix<T> {
    values: Tensor<T>,
    instance_ids: Vec<usize>,
}

impl<T: Scalar> ProbabilityMatrix<T> {
    pub fn new(values: Tensor<T>, instance_ids: Vec<usize>) -> Result<Self> {
        let (n, k) = match *values.shape() {
            [n, k] => (n, k),
            _ => return Err(Error::shape("probabilities", format!("expected N x K, got {:?}", values.shape()))),
        };
        if k < 2 {
            return Err(Error::shape("probabilities", format!("need at least 2 classes, got {k}")));
        }
        if instance_ids.len() != n {
            return Err(Error::shape("probabilities", format!("{} ids for {n} rows", instance_ids.len())));
        }
        for (i, row) in values.data().chunks_exact(k).enumerate() {
            let sum: f64 = row.iter().map(|v| v.to_f64_lossy()).sum();
            let in_range = row.iter().all(|&v| v >= T::zero() && v <= T::one());
            if !in_range || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "row {i} (instance {}) is not a probability vector: sum {sum}",
                    instance_ids[i]
                )));
            }
        }
        Ok(Self { values, instance_ids })
    }

    /// Builds from nested rows; handy in tests and fixtures.
    pub fn from_rows(rows: &[Vec<T>], instance_ids: Vec<usize>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("probabilities", "ragged rows"));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(Tensor::new(vec![rows.len(), k], data)?, instance_ids)
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn instance_ids(&self) -> &[usize] {
        &self.instance_ids
    }

    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.values.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.data().chunks_exact(self.class_count())
    }

    /// Replaces the instance ids (e.g. positions within a batch by pool indices).
    pub fn with_ids(mut self, instance_ids: Vec<usize>) -> Result<Self> {
        if instance_ids.len() != self.len() {
            return Err(Error::shape("probabilities", format!("{} ids for {} rows", instance_ids.len(), self.len())));
        }
        self.instance_ids = instance_ids;
        Ok(self)
    }

    /// Most probable class per row; ties go to the smaller class index.
    pub fn predicted_labels(&self) -> Vec<usize> {
        self.rows()
            .map(|row| {
                let mut best = 0;
                for (k, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}
