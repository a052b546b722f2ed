use serde::Serialize;

use crate::error::{Error, Result};

/// Fraction of positions where `predicted` matches `truth`.
pub fn overall_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty prediction set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Recall of each class; NaN where the class never occurs in `truth`.
pub fn per_class_accuracy(predicted: &[usize], truth: &[usize], class_count: usize) -> Vec<f64> {
    let mut hits = vec![0usize; class_count];
    let mut totals = vec![0usize; class_count];
    for (&p, &t) in predicted.iter().zip(truth) {
        totals[t] += 1;
        hits[t] += usize::from(p == t);
    }
    hits.iter()
        .zip(&totals)
        .map(|(&h, &n)| if n == 0 { f64::NAN } else { h as f64 / n as f64 })
        .collect()
}

/// Labeled-set size at which a curve first reaches `target`, linearly
/// interpolated between the bracketing rounds. `None` if never reached.
pub fn first_crossing(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let (x0, y0) = *points.first()?;
    if y0 >= target {
        return Some(x0);
    }
    points.windows(2).find_map(|w| {
        let ((xa, ya), (xb, yb)) = (w[0], w[1]);
        (ya < target && yb >= target).then(|| xa + (target - ya) / (yb - ya) * (xb - xa))
    })
}

/// How many labels curve `a` needs relative to curve `b` to reach a target accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TargetComparison {
    /// `samples(a) / samples(b)`.
    Ratio { a_samples: f64, b_samples: f64, ratio: f64 },
    /// At least one curve stays below the target; no extrapolation is done.
    Unreached { a_samples: Option<f64>, b_samples: Option<f64> },
}

pub fn samples_to_target(a: &[(f64, f64)], b: &[(f64, f64)], target: f64) -> TargetComparison {
    match (first_crossing(a, target), first_crossing(b, target)) {
        (Some(sa), Some(sb)) => TargetComparison::Ratio {
            a_samples: sa,
            b_samples: sb,
            ratio: sa / sb,
        },
        (a_samples, b_samples) => TargetComparison::Unreached { a_samples, b_samples },
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts() {
        assert_eq!(overall_accuracy(&[0, 1, 2, 2], &[0, 1, 1, 2]).unwrap(), 0.75);
        assert_eq!(overall_accuracy(&[1; 10], &[1, 1, 1, 1, 1, 1, 1, 0, 0, 0]).unwrap(), 0.7);
        assert!(overall_accuracy(&[], &[]).is_err());
        let pc = per_class_accuracy(&[0, 1, 2, 2], &[0, 1, 1, 2], 4);
        assert_eq!(&pc[..3], &[1.0, 0.5, 1.0]);
        assert!(pc[3].is_nan());
    }

    #[test]
    fn crossing_interpolates() {
        let curve = [(10.0, 0.5), (20.0, 0.7), (30.0, 0.9)];
        assert!((first_crossing(&curve, 0.8).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(first_crossing(&curve, 0.4), Some(10.0));
        assert_eq!(first_crossing(&curve, 0.95), None);
    }

    #[test]
    fn ratio_or_unreached() {
        let a = [(10.0, 0.5), (20.0, 0.9)];
        let b = [(10.0, 0.5), (40.0, 0.9)];
        match samples_to_target(&a, &b, 0.9) {
            TargetComparison::Ratio { ratio, .. } => assert!((ratio - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            samples_to_target(&a, &[(10.0, 0.1)], 0.9),
            TargetComparison::Unreached { a_samples: Some(20.0), b_samples: None }
        );
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
