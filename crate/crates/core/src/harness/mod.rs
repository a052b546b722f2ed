//! Experiment orchestration: configuration, the per-seed active-learning
//! loop, Monte Carlo aggregation, committee-size sweeps, result files, and
//! text reports.

mod config;
mod export;
mod metrics;
mod montecarlo;
mod report;
mod run;

pub use config::{DatasetSource, ExperimentConfig};
pub use export::{export_results, export_sweep, read_curve_csv, CurveRow, ExportedFiles};
pub use metrics::{first_crossing, mean_std, overall_accuracy, per_class_accuracy, samples_to_target, TargetComparison};
pub use montecarlo::{
    run_monte_carlo, run_monte_carlo_on, sensitivity_sweep, sensitivity_sweep_on, CurveSummary, MonteCarloResult,
    SweepEntry,
};
pub use report::report;
pub use run::{run_single, run_single_on, LearningCurve, RngStream, RoundRecord};
