//! Metrics files.
//!
//! Per run directory `<out_dir>/<name>/`:
//!
//! * `qfl_seed<s>.csv`, `quantum-baseline_seed<s>.csv`,
//!   `classical-baseline_seed<s>.csv`: `round,client_id,train_loss,train_acc,test_acc`
//!   (baseline rows use the task index as `client_id`);
//! * `aggregate.csv`: per round and series, mean and population standard
//!   deviation across seeds of the per-seed client (or task) means;
//! * `records.json` and `meta.json`.
//!
//! CSV numbers are fixed-point with six decimals, rounds count from 1, lines
//! end in `\n`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qfl_core::fedcore::RoundMetrics;
use qfl_core::trainers::aggregate_baseline_runs;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::experiment::{mean, RunRecord, TaskCurve};

pub const RUN_HEADER: &str = "round,client_id,train_loss,train_acc,test_acc";
pub const AGGREGATE_HEADER: &str =
    "round,series,train_loss_mean,train_loss_std,train_acc_mean,train_acc_std,test_acc_mean,test_acc_std";
pub const QUANTUM_BASELINE: &str = "Quantum baseline";
pub const CLASSICAL_BASELINE: &str = "Classical baseline";

/// Run identity read back by the plotter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub name: String,
    pub label: String,
    pub chart: String,
    pub experiment: String,
    pub topology: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub rounds: usize,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn run_csv(rounds: &[RoundMetrics]) -> String {
    let mut out = String::with_capacity(64 * rounds.len());
    out.push_str(RUN_HEADER);
    out.push('\n');
    for r in rounds {
        for c in &r.clients {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6}",
                r.round_idx + 1,
                c.client_id,
                c.train_loss,
                c.train_accuracy,
                c.test_accuracy
            )
            .expect("string write");
        }
    }
    out
}

/// Baseline curves of one seed as rows with one "client" per task.
fn baseline_rounds(curves: &[TaskCurve]) -> Vec<RoundMetrics> {
    let n = curves.first().map_or(0, |c| c.rounds.len());
    (0..n)
        .map(|r| {
            let mut row = curves[0].rounds[r].clone();
            row.clients = curves
                .iter()
                .enumerate()
                .flat_map(|(task, c)| {
                    c.rounds[r].clients.iter().cloned().map(move |mut m| {
                        m.client_id = task;
                        m
                    })
                })
                .collect();
            row
        })
        .collect()
}

/// One point of a seed curve: train loss, train accuracy, test accuracy.
type Point = [f64; 3];

fn qfl_curve(rounds: &[RoundMetrics]) -> Vec<Point> {
    rounds
        .iter()
        .map(|r| [r.mean_train_loss, r.mean_train_accuracy, r.mean_test_accuracy])
        .collect()
}

fn baseline_curve(curves: &[TaskCurve]) -> Result<Vec<Point>> {
    let refs: Vec<&[RoundMetrics]> = curves.iter().map(|c| c.rounds.as_slice()).collect();
    Ok(aggregate_baseline_runs(&refs)?
        .into_iter()
        .map(|a| [a.train_loss, a.train_accuracy, a.test_accuracy])
        .collect())
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len().max(1) as f64;
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub round: usize,
    pub series: String,
    /// `(mean, std)` of train loss, train accuracy, test accuracy.
    pub stats: [(f64, f64); 3],
}

fn aggregate_series(series: &str, seed_curves: &[Vec<Point>]) -> Result<Vec<AggregateRow>> {
    let n = seed_curves.first().map_or(0, Vec::len);
    if seed_curves.iter().any(|c| c.len() != n) {
        return Err(CliError::Runtime(format!("series `{series}` has curves of unequal length")));
    }
    Ok((0..n)
        .map(|r| {
            let col = |k: usize| mean_std(&seed_curves.iter().map(|c| c[r][k]).collect::<Vec<_>>());
            AggregateRow {
                round: r + 1,
                series: series.to_string(),
                stats: [col(0), col(1), col(2)],
            }
        })
        .collect())
}

pub fn aggregate_rows(label: &str, records: &[RunRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(CliError::Runtime("no run records to aggregate".into()));
    }
    let mut rows = aggregate_series(label, &records.iter().map(|r| qfl_curve(&r.rounds)).collect::<Vec<_>>())?;
    if !records[0].quantum_baseline.is_empty() {
        let curves = records
            .iter()
            .map(|r| baseline_curve(&r.quantum_baseline))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(aggregate_series(QUANTUM_BASELINE, &curves)?);
    }
    if !records[0].classical_baseline.is_empty() {
        let curves = records
            .iter()
            .map(|r| baseline_curve(&r.classical_baseline))
            .collect::<Result<Vec<_>>>()?;
        rows.extend(aggregate_series(CLASSICAL_BASELINE, &curves)?);
    }
    Ok(rows)
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for row in rows {
        write!(out, "{},{}", row.round, row.series).expect("string write");
        for (m, s) in row.stats {
            write!(out, ",{m:.6},{s:.6}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Writes every metrics file for `records` and returns the run directory.
pub fn emit_metrics_csv(cfg: &RunConfig, records: &[RunRecord], out_dir: &Path) -> Result<PathBuf> {
    if records.is_empty() {
        return Err(CliError::Runtime("no run records to write".into()));
    }
    let dir = out_dir.join(&cfg.name);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    for r in records {
        write_file(&dir.join(format!("qfl_seed{}.csv", r.seed)), &run_csv(&r.rounds))?;
        if !r.quantum_baseline.is_empty() {
            write_file(
                &dir.join(format!("quantum-baseline_seed{}.csv", r.seed)),
                &run_csv(&baseline_rounds(&r.quantum_baseline)),
            )?;
        }
        if !r.classical_baseline.is_empty() {
            write_file(
                &dir.join(format!("classical-baseline_seed{}.csv", r.seed)),
                &run_csv(&baseline_rounds(&r.classical_baseline)),
            )?;
        }
    }
    write_file(&dir.join("aggregate.csv"), &aggregate_csv(&aggregate_rows(&cfg.label(), records)?))?;
    let meta = RunMeta {
        name: cfg.name.clone(),
        label: cfg.label(),
        chart: cfg.chart(),
        experiment: cfg.experiment.as_str().into(),
        topology: cfg.topology.as_str().into(),
        config_hash: cfg.config_hash(),
        seeds: cfg.seeds.clone(),
        rounds: cfg.rounds,
    };
    write_file(&dir.join("meta.json"), &pretty_json(&meta))?;
    write_file(&dir.join("records.json"), &pretty_json(&records))?;
    Ok(dir)
}

fn pretty_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("metrics serialize");
    s.push('\n');
    s
}
