use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{ComparisonReport, DecisionRow, HarnessError, OptimalReport};
use crate::stats::round_value;

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn ms(x: f64) -> String {
    if x.is_finite() {
        format!("{:.1}", round_value(x, 1))
    } else {
        "inf".to_string()
    }
}

fn decisions_csv(rows: impl Iterator<Item = (u64, DecisionRow)>, n_exploit: usize) -> String {
    let mut out = String::from("seed,epoch,node");
    for k in 1..=n_exploit {
        write!(out, ",exploit{k}").unwrap();
    }
    out.push_str(",explore\n");
    for (seed, r) in rows {
        write!(out, "{seed},{},{}", r.epoch, r.node).unwrap();
        for k in 0..n_exploit {
            match r.exploit.get(k) {
                Some(p) => write!(out, ",{p}").unwrap(),
                None => out.push(','),
            }
        }
        let explore: Vec<String> = r.explore.iter().map(|p| p.to_string()).collect();
        writeln!(out, ",{}", explore.join(";")).unwrap();
    }
    out
}

fn histogram_csv(h: &BTreeMap<usize, usize>) -> String {
    let mut out = String::from("bucket,count\n");
    for (bucket, count) in h {
        writeln!(out, "{bucket},{count}").unwrap();
    }
    out
}

/// `summary.json`, `histogram.csv`, `histogram_far.csv`, `graphs.csv`,
/// `lambda.csv` and `decisions.csv` under `dir`.
pub fn write_optimal(report: &OptimalReport, dir: &Path) -> Result<(), HarnessError> {
    write_json(&dir.join("summary.json"), report)?;
    write(&dir.join("histogram.csv"), &histogram_csv(&report.histogram))?;
    write(&dir.join("histogram_far.csv"), &histogram_csv(&report.histogram_far))?;
    let mut graphs = String::from("graph,seed,adapter,non_optimal_epochs,far_epochs,settled_at,lambda0_ms\n");
    let mut lambda = String::from("graph,epoch,lambda_ms,optimal\n");
    for g in &report.graphs {
        let settled = g.settled_at.map_or(String::new(), |s| s.to_string());
        writeln!(graphs, "{},{},{},{},{},{},{}", g.graph, g.seed, g.adapter, g.non_optimal_epochs, g.far_epochs, settled, ms(g.lambda0)).unwrap();
        for (e, (&l, &o)) in g.lambda.iter().zip(&g.optimal).enumerate() {
            writeln!(lambda, "{},{e},{},{}", g.graph, ms(l), o as u8).unwrap();
        }
    }
    write(&dir.join("graphs.csv"), &graphs)?;
    write(&dir.join("lambda.csv"), &lambda)?;
    let rows = report.graphs.iter().flat_map(|g| g.decisions.iter().map(move |d| (g.seed, d.clone())));
    write(&dir.join("decisions.csv"), &decisions_csv(rows, report.config.n_exploit))
}

/// `summary.json` plus per-strategy `wasted.csv`, `decisions.csv` and, when
/// enabled, `completions.jsonl` under `dir/<strategy>/`.
pub fn write_comparison(report: &ComparisonReport, dir: &Path) -> Result<(), HarnessError> {
    write_json(&dir.join("summary.json"), report)?;
    for strategy in [report.left, report.right] {
        let name = serde_json::to_value(strategy)?.as_str().unwrap_or("strategy").to_string();
        let sub = dir.join(name);
        let runs: Vec<_> = report.runs.iter().filter(|r| r.strategy == strategy).collect();
        let mut wasted = String::from("seed,epoch,node,wasted_ms\n");
        for r in &runs {
            for (e, row) in r.wasted.iter().enumerate() {
                for (a, &w) in r.adapters.iter().zip(row) {
                    writeln!(wasted, "{},{e},{a},{}", r.seed, ms(w)).unwrap();
                }
            }
        }
        write(&sub.join("wasted.csv"), &wasted)?;
        let rows = runs.iter().flat_map(|r| r.decisions.iter().map(move |d| (r.seed, d.clone())));
        write(&sub.join("decisions.csv"), &decisions_csv(rows, report.config.n_exploit))?;
        if report.config.dump_completions {
            let mut lines = String::new();
            for r in &runs {
                for d in &r.dumps {
                    lines.push_str(d);
                    lines.push('\n');
                }
            }
            write(&sub.join("completions.jsonl"), &lines)?;
        }
    }
    Ok(())
}
