use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use aedl::data::{generate_synthetic, SyntheticSpec};
use aedl::harness::{export_results, export_sweep, report, run_monte_carlo, sensitivity_sweep, ExperimentConfig};
use aedl::PatchDataset64;

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "AEDL_THREADS";

#[derive(Parser)]
#[command(name = "aedl", version, about = "Active learning with snapshot committees of patch CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset utilities.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Run every Monte Carlo seed of one experiment and export the curves.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat an aedl experiment for several committee sizes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        committee_sizes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize every result directory found under `--in`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Accuracy used for the labels-to-target comparison.
        #[arg(long, default_value_t = 0.85)]
        target: f64,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate a synthetic dataset from a TOML recipe.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> aedl::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Dataset {
            command: DatasetCommand::Synth { spec, out },
        } => {
            let spec = SyntheticSpec::load(&spec)?;
            let ds: PatchDataset64 = generate_synthetic(&spec)?;
            ds.save(&out)?;
            println!("wrote {} patches to {}", ds.len(), out.display());
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let result = run_monte_carlo(&cfg)?;
            export_results(&result, &dir)?;
            let s = &result.summary;
            for (n, (m, sd)) in s.labeled_counts.iter().zip(s.mean_oa.iter().zip(&s.std_oa)) {
                println!("{n:>6} labeled  OA {m:.4} +/- {sd:.4}");
            }
            println!("results in {}", dir.display());
        }
        Command::Sweep {
            config,
            committee_sizes,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let entries = sensitivity_sweep(&cfg, &committee_sizes)?;
            export_sweep(&entries, &dir)?;
            for e in &entries {
                let last = e.result.summary.mean_oa.last().copied().unwrap_or(f64::NAN);
                println!("n={:<3} final OA {last:.4}", e.committee_size);
            }
            println!("results in {}", dir.display());
        }
        Command::Report { input, target } => print!("{}", report(&input, target)?),
    }
    Ok(())
}

fn configure_threads() -> aedl::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| aedl::Error::Config(format!("{THREADS_ENV}={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| aedl::Error::Config(e.to_string()))?;
    info!("using {threads} worker threads");
    Ok(())
}
