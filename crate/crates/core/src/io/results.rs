//! Per-run output files.
//!
//! | file              | content                                           |
//! |-------------------|---------------------------------------------------|
//! | `assignments.csv` | `column,cluster`, both one-based                  |
//! | `trace.csv`       | one row per iteration (see [`TraceRow`])          |
//! | `metrics.json`    | [`RunMetrics`]                                    |
//! | `U.csv`, `V.csv`  | factors, one matrix row per line, no header       |
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{OnmfError, Result};
use crate::partition::{Factorization, Partition};
use crate::trace::{RunTrace, TraceRow};

/// Contents of `metrics.json`. Key order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algorithm: String,
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    /// `null` when the dataset has no labels.
    pub accuracy: Option<f64>,
    pub iterations: usize,
    /// Wall-clock seconds, rounded to milliseconds.
    pub seconds: f64,
    /// `||M - UV||_F` of the returned factors.
    pub final_error: f64,
    /// `||V V^T - I||_F` of `V` with unit rows.
    pub final_orth_residual: f64,
    /// `||min(V,0)||_F / ||V||_F` of the last iterate.
    pub final_neg_residual: f64,
}

pub fn round_seconds(s: f64) -> f64 {
    (s * 1e3).round() / 1e3
}

pub fn write_assignments(path: &Path, p: &Partition) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["column", "cluster"])?;
    for (j, c) in p.one_based_pairs() {
        w.write_record([j.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignments(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let c: usize = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| OnmfError::DimensionMismatch("malformed assignment row".into()))?;
        out.push(c - 1);
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if trace.is_empty() {
        w.write_record(["iteration", "error", "neg_residual", "orth_residual", "beta", "rho", "elapsed_ms"])?;
    }
    for row in &trace.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<RunTrace> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize::<TraceRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RunTrace { rows })
}

pub fn write_matrix_csv(path: &Path, a: ArrayView2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in a.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV into a dense matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let width = rec.len();
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(OnmfError::DimensionMismatch(format!(
                    "{}:{}: {width} fields, expected {c}",
                    path.display(),
                    i + 1
                )))
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| OnmfError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad number `{field}`"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), values).map_err(|e| OnmfError::DimensionMismatch(e.to_string()))
}

pub fn write_metrics(path: &Path, metrics: &RunMetrics) -> Result<()> {
    let mut text = serde_json::to_string_pretty(metrics)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<RunMetrics> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Everything one run writes to its output directory.
pub struct RunOutputs<'a> {
    pub partition: &'a Partition,
    pub trace: &'a RunTrace,
    pub metrics: &'a RunMetrics,
    pub factorization: &'a Factorization,
}

pub fn write_results(out: &RunOutputs<'_>, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_assignments(&out_dir.join("assignments.csv"), out.partition)?;
    write_trace(&out_dir.join("trace.csv"), out.trace)?;
    write_metrics(&out_dir.join("metrics.json"), out.metrics)?;
    write_factors(out.factorization, out_dir)
}

pub fn write_factors(f: &Factorization, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_matrix_csv(&out_dir.join("U.csv"), f.u.view())?;
    write_matrix_csv(&out_dir.join("V.csv"), f.v.view())
}
