use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::montecarlo::{MonteCarloResult, SweepEntry};
use super::run::LearningCurve;
use crate::error::{Error, Result};

/// Paths written by [`export_results`], relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportedFiles {
    pub aggregate: PathBuf,
    pub summary: PathBuf,
    pub runs: Vec<PathBuf>,
    pub queries: PathBuf,
    pub agreement: Option<PathBuf>,
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a super::ExperimentConfig,
    config_digest: String,
    resolved_seeds: Vec<u64>,
    class_count: usize,
    files: &'a ExportedFiles,
}

fn curve_header(class_count: usize) -> Vec<String> {
    let mut h: Vec<String> = ["strategy", "network", "seed", "round", "labeled_count", "oa"]
        .map(String::from)
        .into();
    h.extend((0..class_count).map(|k| format!("per_class_oa_{k}")));
    h.push("wall_time_s".into());
    h
}

fn curve_rows(curve: &LearningCurve) -> impl Iterator<Item = Vec<String>> + '_ {
    curve.records.iter().map(|r| {
        let mut row = vec![
            curve.strategy.to_string(),
            curve.network.to_string(),
            curve.seed.to_string(),
            r.round.to_string(),
            r.labeled_count.to_string(),
            r.overall_accuracy.to_string(),
        ];
        row.extend(r.per_class_accuracy.iter().map(f64::to_string));
        row.push(r.wall_time_s.to_string());
        row
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Writes per-run and aggregate learning curves, the per-round summary,
/// queried ids, committee agreement (aedl strategies), and a JSON manifest
/// into `dir`. Floats use the shortest representation that round-trips.
pub fn export_results(result: &MonteCarloResult, dir: impl AsRef<Path>) -> Result<ExportedFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("runs")).map_err(|e| Error::io(dir, e))?;
    let class_count = result.runs.first().map_or(0, |r| r.class_count);
    let header = curve_header(class_count);

    let mut files = ExportedFiles {
        aggregate: "aggregate.csv".into(),
        summary: "summary.csv".into(),
        runs: Vec::new(),
        queries: "queries.csv".into(),
        agreement: None,
        manifest: "manifest.json".into(),
    };

    let mut aggregate = writer(&dir.join(&files.aggregate))?;
    aggregate.write_record(&header)?;
    for curve in &result.runs {
        let rel = PathBuf::from("runs").join(format!("{}_seed{}.csv", curve.strategy, curve.seed));
        let mut w = writer(&dir.join(&rel))?;
        let mut h = header.clone();
        h.push("final_params_oa".into());
        w.write_record(&h)?;
        for (mut row, rec) in curve_rows(curve).zip(&curve.records) {
            aggregate.write_record(&row)?;
            row.push(rec.final_params_accuracy.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(dir.join(&rel), e))?;
        files.runs.push(rel);
    }
    aggregate.flush().map_err(|e| Error::io(dir, e))?;

    let mut summary = writer(&dir.join(&files.summary))?;
    summary.write_record(["round", "labeled_count", "mean_oa", "std_oa"])?;
    let s = &result.summary;
    for (round, ((n, m), sd)) in s.labeled_counts.iter().zip(&s.mean_oa).zip(&s.std_oa).enumerate() {
        summary.write_record([round.to_string(), n.to_string(), m.to_string(), sd.to_string()])?;
    }
    summary.flush().map_err(|e| Error::io(dir, e))?;

    let mut queries = writer(&dir.join(&files.queries))?;
    queries.write_record(["strategy", "seed", "round", "rank", "instance_id"])?;
    for curve in &result.runs {
        for rec in &curve.records {
            for (rank, id) in rec.queried.iter().enumerate() {
                queries.write_record([
                    curve.strategy.to_string(),
                    curve.seed.to_string(),
                    rec.round.to_string(),
                    rank.to_string(),
                    id.to_string(),
                ])?;
            }
        }
    }
    queries.flush().map_err(|e| Error::io(dir, e))?;

    let members = result
        .runs
        .iter()
        .flat_map(|c| &c.records)
        .filter_map(|r| r.agreement.as_ref())
        .map(|a| a.member_count)
        .max();
    if let Some(members) = members {
        let rel = PathBuf::from("agreement.csv");
        let mut w = writer(&dir.join(&rel))?;
        let mut h: Vec<String> = ["strategy", "seed", "round", "members"].map(String::from).into();
        h.extend((0..=members).map(|m| format!("count_{m}")));
        w.write_record(&h)?;
        for curve in &result.runs {
            for rec in &curve.records {
                if let Some(a) = &rec.agreement {
                    let mut row = vec![
                        curve.strategy.to_string(),
                        curve.seed.to_string(),
                        rec.round.to_string(),
                        a.member_count.to_string(),
                    ];
                    row.extend((0..=members).map(|m| a.counts.get(m).copied().unwrap_or(0).to_string()));
                    w.write_record(&row)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        files.agreement = Some(rel);
    }

    let manifest = Manifest {
        config: &result.config,
        config_digest: result.config.digest(),
        resolved_seeds: result.config.resolved_seeds(),
        class_count,
        files: &files,
    };
    let path = dir.join(&files.manifest);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(files)
}

/// One subdirectory `n<size>` per sweep entry plus `sweep.csv` with the
/// mean curve of every committee size.
pub fn export_sweep(entries: &[SweepEntry], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = writer(&dir.join("sweep.csv"))?;
    w.write_record(["committee_size", "round", "labeled_count", "mean_oa", "std_oa"])?;
    for entry in entries {
        export_results(&entry.result, dir.join(format!("n{}", entry.committee_size)))?;
        let s = &entry.result.summary;
        for (round, ((n, m), sd)) in s.labeled_counts.iter().zip(&s.mean_oa).zip(&s.std_oa).enumerate() {
            w.write_record([
                entry.committee_size.to_string(),
                round.to_string(),
                n.to_string(),
                m.to_string(),
                sd.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(dir, e))
}

/// A row of a learning-curve CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub strategy: String,
    pub network: String,
    pub seed: u64,
    pub round: usize,
    pub labeled_count: usize,
    pub oa: f64,
    pub per_class_oa: Vec<f64>,
    pub wall_time_s: f64,
}

/// Reads an `aggregate.csv` or per-run CSV back.
pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Vec<CurveRow>> {
    let path = path.as_ref();
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        detail,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
    let [strategy, network, seed, round, labeled, oa, wall] =
        ["strategy", "network", "seed", "round", "labeled_count", "oa", "wall_time_s"].map(col);
    let (strategy, network, seed, round, labeled, oa, wall) = (strategy?, network?, seed?, round?, labeled?, oa?, wall?);
    let per_class: Vec<usize> = (0..)
        .map_while(|k| header.iter().position(|h| h == format!("per_class_oa_{k}")))
        .collect();

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {:?}: {e}", line + 1, field(i))))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|e| bad(format!("row {}: {:?}: {e}", line + 1, field(i))))
        };
        rows.push(CurveRow {
            strategy: field(strategy).to_string(),
            network: field(network).to_string(),
            seed: int(seed)?,
            round: int(round)? as usize,
            labeled_count: int(labeled)? as usize,
            oa: num(oa)?,
            per_class_oa: per_class.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            wall_time_s: num(wall)?,
        });
    }
    Ok(rows)
}
