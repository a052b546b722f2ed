use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use walkdir::WalkDir;

use super::export::read_curve_csv;
use super::metrics::{mean_std, samples_to_target, TargetComparison};
use crate::error::{Error, Result};

struct Group {
    labeled: Vec<usize>,
    oa_by_round: Vec<Vec<f64>>,
}

impl Group {
    fn mean_points(&self) -> Vec<(f64, f64)> {
        self.labeled
            .iter()
            .zip(&self.oa_by_round)
            .map(|(&n, oa)| (n as f64, mean_std(oa).0))
            .collect()
    }
}

/// Text summary of every `aggregate.csv` under `dir`: mean and std OA per
/// round, labels-to-target ratios between every pair of curves, and the
/// final-round committee agreement where recorded.
pub fn report(dir: impl AsRef<Path>, target: f64) -> Result<String> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    let mut agreement: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    let entries = WalkDir::new(dir).sort_by_file_name().into_iter();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Config(e.to_string()))?;
        let prefix = entry
            .path()
            .parent()
            .and_then(|p| p.strip_prefix(dir).ok())
            .map(|p| p.display().to_string())
            .filter(|p| !p.is_empty())
            .map(|p| format!("{p}/"))
            .unwrap_or_default();
        match entry.file_name().to_str() {
            Some("aggregate.csv") => {
                for row in read_curve_csv(entry.path())? {
                    let key = format!("{prefix}{}/{}", row.strategy, row.network);
                    let g = groups.entry(key).or_insert_with(|| Group {
                        labeled: Vec::new(),
                        oa_by_round: Vec::new(),
                    });
                    if g.labeled.len() <= row.round {
                        g.labeled.resize(row.round + 1, row.labeled_count);
                        g.oa_by_round.resize(row.round + 1, Vec::new());
                    }
                    g.oa_by_round[row.round].push(row.oa);
                }
            }
            Some("agreement.csv") => read_final_agreement(entry.path(), &prefix, &mut agreement)?,
            _ => {}
        }
    }
    if groups.is_empty() {
        return Err(Error::Config(format!("no aggregate.csv found under {}", dir.display())));
    }

    let mut out = String::new();
    for (name, g) in &groups {
        let _ = writeln!(out, "== {name} ({} runs)", g.oa_by_round[0].len());
        let _ = writeln!(out, "{:>5} {:>8} {:>8} {:>8}", "round", "labeled", "mean_oa", "std_oa");
        for (round, (n, oa)) in g.labeled.iter().zip(&g.oa_by_round).enumerate() {
            let (m, s) = mean_std(oa);
            let _ = writeln!(out, "{round:>5} {n:>8} {m:>8.4} {s:>8.4}");
        }
    }

    if groups.len() > 1 {
        let _ = writeln!(out, "\nlabels needed to reach OA {target} (row / column)");
        let names: Vec<&String> = groups.keys().collect();
        for a in &names {
            for b in &names {
                if a == b {
                    continue;
                }
                let cmp = samples_to_target(&groups[*a].mean_points(), &groups[*b].mean_points(), target);
                let text = match cmp {
                    TargetComparison::Ratio { a_samples, b_samples, ratio } => {
                        format!("{ratio:.3} ({a_samples:.1} vs {b_samples:.1})")
                    }
                    TargetComparison::Unreached { a_samples, b_samples } => format!(
                        "unreached ({} vs {})",
                        a_samples.map_or("never".into(), |s| format!("{s:.1}")),
                        b_samples.map_or("never".into(), |s| format!("{s:.1}"))
                    ),
                };
                let _ = writeln!(out, "  {a} / {b}: {text}");
            }
        }
    }

    for (name, counts) in &agreement {
        let total: u64 = counts.iter().sum();
        let n = counts.len() - 1;
        let full = counts[n] as f64 / total.max(1) as f64;
        let below: u64 = counts
            .iter()
            .enumerate()
            .filter(|(m, _)| (*m as f64) < 2.0 * n as f64 / 3.0)
            .map(|(_, c)| c)
            .sum();
        let _ = writeln!(
            out,
            "\nagreement {name} final round, {n} members: counts {counts:?}, full {full:.4}, below 2/3 {:.4}",
            below as f64 / total.max(1) as f64
        );
    }
    Ok(out)
}

/// Sums the last-round histogram of every seed, keyed by directory and strategy.
fn read_final_agreement(path: &Path, prefix: &str, into: &mut BTreeMap<String, Vec<u64>>) -> Result<()> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let width = reader.headers()?.len();
    let mut last: BTreeMap<(String, String), (u64, Vec<u64>)> = BTreeMap::new();
    for record in reader.records() {
        let r = record?;
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|e| Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                detail: format!("{s:?}: {e}"),
            })
        };
        let round = parse(&r[2])?;
        let counts = (4..width).map(|i| parse(&r[i])).collect::<Result<Vec<_>>>()?;
        let slot = last.entry((r[0].to_string(), r[1].to_string())).or_insert((0, Vec::new()));
        if round >= slot.0 {
            *slot = (round, counts);
        }
    }
    for ((strategy, _seed), (_, counts)) in last {
        let sum = into.entry(format!("{prefix}{strategy}")).or_insert_with(|| vec![0; counts.len()]);
        sum.iter_mut().zip(&counts).for_each(|(s, c)| *s += c);
    }
    Ok(())
}
