//! Serialization of run artifacts to a directory.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{MacStats, TraceRow};
use crate::experiment::{AlphaSweep, Comparison, RunArtifacts, SweepReport};
use crate::metrics::{CdfPoint, RunSummary};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn write(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| OutputError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write(path, &text)
}

fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("time_us,flow,seq,event,node,cause\n");
    for r in rows {
        let cause = r.cause.map_or("", |c| c.name());
        let _ = writeln!(s, "{},{},{},{},{},{}", r.time.as_micros(), r.flow, r.seq, r.event.name(), r.node, cause);
    }
    s
}

pub fn cdf_csv(points: &[CdfPoint]) -> String {
    let mut s = String::from("value,fraction\n");
    for p in points {
        let _ = writeln!(s, "{},{}", p.value, p.fraction);
    }
    s
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    mac: &'a MacStats,
    events: u64,
}

/// Writes `summary.json`, the CDF tables and, when the run recorded one,
/// `trace.csv`.
pub fn emit(artifacts: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    write_json(
        &summary,
        &SummaryFile { summary: &artifacts.summary, mac: &artifacts.output.mac_stats, events: artifacts.output.events },
    )?;
    written.push(summary);
    if !artifacts.output.trace.is_empty() {
        let p = dir.join("trace.csv");
        write(&p, &trace_csv(&artifacts.output.trace))?;
        written.push(p);
    }
    for (name, points) in [("delay_cdf.csv", &artifacts.delay_cdf), ("reorder_cdf.csv", &artifacts.reorder_cdf)] {
        if !points.is_empty() {
            let p = dir.join(name);
            write(&p, &cdf_csv(points))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// One subdirectory per protocol plus `comparison.json`.
pub fn emit_comparison(cmp: &Comparison, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for run in &cmp.runs {
        written.extend(emit(run, &dir.join(&run.summary.protocol))?);
    }
    #[derive(Serialize)]
    struct Cmp<'a> {
        kept: bool,
        single_hop: bool,
        differentials: &'a [crate::experiment::DifferentialRow],
        summaries: Vec<&'a RunSummary>,
    }
    let p = dir.join("comparison.json");
    write_json(
        &p,
        &Cmp {
            kept: cmp.kept,
            single_hop: cmp.single_hop,
            differentials: &cmp.differentials,
            summaries: cmp.runs.iter().map(|r| &r.summary).collect(),
        },
    )?;
    written.push(p);
    Ok(written)
}

pub fn emit_alpha(sweep: &AlphaSweep, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    ensure_dir(dir)?;
    let mut s = String::from("alpha,mean_delay_ms\n");
    for r in &sweep.rows {
        let _ = writeln!(s, "{},{}", r.alpha, r.mean_delay_ms.map_or(String::new(), |d| d.to_string()));
    }
    let _ = writeln!(s, "cdp,{}", sweep.cdp_mean_delay_ms.map_or(String::new(), |d| d.to_string()));
    let csv = dir.join("alpha.csv");
    write(&csv, &s)?;
    let json = dir.join("alpha.json");
    write_json(&json, sweep)?;
    Ok(vec![csv, json])
}

pub fn emit_sweep(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    ensure_dir(dir)?;
    let p = dir.join("sweep.json");
    write_json(&p, report)?;
    let mut written = vec![p];
    for c in &report.cdfs {
        let load = match c.load {
            crate::metrics::LoadClass::Low => "low",
            crate::metrics::LoadClass::High => "high",
        };
        let p = dir.join(format!("cdf_{}_{}_{}.csv", c.metric, c.candidate, load));
        write(&p, &cdf_csv(&c.points))?;
        written.push(p);
    }
    Ok(written)
}
