use super::ProbabilityMatrix;
use crate::scalar::Scalar;

/// Shannon entropy (natural log) of each row; `0 ln 0` counts as zero.
pub fn score_entropy<T: Scalar>(probs: &ProbabilityMatrix<T>) -> Vec<T> {
    probs
        .rows()
        .map(|row| {
            -row.iter()
                .filter(|&&p| p > T::zero())
                .map(|&p| p * p.ln())
                .sum::<T>()
        })
        .collect()
}

/// Gap between the largest and second-largest probability of each row.
pub fn score_bt_margin<T: Scalar>(probs: &ProbabilityMatrix<T>) -> Vec<T> {
    probs
        .rows()
        .map(|row| {
            let (mut first, mut second) = (T::neg_infinity(), T::neg_infinity());
            for &p in row {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            first - second
        })
        .collect()
}
