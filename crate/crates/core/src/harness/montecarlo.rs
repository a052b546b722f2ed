use rayon::prelude::*;
use serde::Serialize;

use super::metrics::mean_std;
use super::run::{run_single_on, LearningCurve};
use super::ExperimentConfig;
use crate::data::PatchDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-round mean and population standard deviation of OA across runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub labeled_counts: Vec<usize>,
    pub mean_oa: Vec<f64>,
    pub std_oa: Vec<f64>,
}

impl CurveSummary {
    pub fn from_runs(runs: &[LearningCurve]) -> Self {
        let rounds = runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
        let mut summary = Self {
            labeled_counts: Vec::with_capacity(rounds),
            mean_oa: Vec::with_capacity(rounds),
            std_oa: Vec::with_capacity(rounds),
        };
        for round in 0..rounds {
            let at: Vec<_> = runs.iter().filter_map(|r| r.records.get(round)).collect();
            let oa: Vec<f64> = at.iter().map(|r| r.overall_accuracy).collect();
            let (m, s) = mean_std(&oa);
            summary.labeled_counts.push(at[0].labeled_count);
            summary.mean_oa.push(m);
            summary.std_oa.push(s);
        }
        summary
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.labeled_counts
            .iter()
            .zip(&self.mean_oa)
            .map(|(&n, &oa)| (n as f64, oa))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub config: ExperimentConfig,
    pub runs: Vec<LearningCurve>,
    pub summary: CurveSummary,
}

/// Runs every configured seed in parallel. Results come back in seed order.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    let dataset = config.dataset.load::<f64>()?;
    run_monte_carlo_on(&dataset, config)
}

pub fn run_monte_carlo_on<T: Scalar>(dataset: &PatchDataset<T>, config: &ExperimentConfig) -> Result<MonteCarloResult> {
    config.validate()?;
    let runs = config
        .resolved_seeds()
        .into_par_iter()
        .map(|seed| run_single_on(dataset, config, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloResult {
        config: config.clone(),
        summary: CurveSummary::from_runs(&runs),
        runs,
    })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub committee_size: usize,
    pub result: MonteCarloResult,
}

/// Repeats the Monte Carlo experiment once per committee size. Only the
/// committee size changes between entries.
pub fn sensitivity_sweep(config: &ExperimentConfig, committee_sizes: &[usize]) -> Result<Vec<SweepEntry>> {
    config.validate()?;
    let dataset = config.dataset.load::<f64>()?;
    sensitivity_sweep_on(&dataset, config, committee_sizes)
}

pub fn sensitivity_sweep_on<T: Scalar>(
    dataset: &PatchDataset<T>,
    config: &ExperimentConfig,
    committee_sizes: &[usize],
) -> Result<Vec<SweepEntry>> {
    if !config.strategy.uses_committee() {
        return Err(Error::Config(format!(
            "a committee-size sweep needs an aedl strategy, got {}",
            config.strategy
        )));
    }
    if committee_sizes.is_empty() {
        return Err(Error::Config("no committee sizes given".into()));
    }
    for &n in committee_sizes {
        config.check_committee_size(n)?;
    }
    committee_sizes
        .iter()
        .map(|&n| {
            let cfg = ExperimentConfig {
                committee_size: n,
                ..config.clone()
            };
            Ok(SweepEntry {
                committee_size: n,
                result: run_monte_carlo_on(dataset, &cfg)?,
            })
        })
        .collect()
}
