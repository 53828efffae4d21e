//! Repeated runs of one algorithm on one dataset, and their aggregate.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::warn;
use onmfkit::io::{self, Dataset, RunMetrics, RunOutputs};
use onmfkit::metrics::accuracy;
use onmfkit::{Registry, RunOutput, RunParams};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::ExperimentConfig;

pub struct RunRecord {
    pub seed: u64,
    pub metrics: RunMetrics,
    pub output: RunOutput,
}

/// One line of `summary.csv` / the bench table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: String,
    pub dataset: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
    pub k: usize,
    pub runs: usize,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    pub iterations_mean: f64,
    pub seconds_mean: f64,
    /// Seed of the run with the smallest reconstruction error.
    pub best_seed: u64,
    pub best_error: f64,
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "algorithm",
    "dataset",
    "rows",
    "cols",
    "nnz",
    "k",
    "runs",
    "accuracy_mean",
    "accuracy_std",
    "iterations_mean",
    "seconds_mean",
    "best_seed",
    "best_error",
    "status",
];

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl SummaryRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.dataset.clone(),
            self.rows.to_string(),
            self.cols.to_string(),
            self.nnz.to_string(),
            self.k.to_string(),
            self.runs.to_string(),
            opt(self.accuracy_mean),
            opt(self.accuracy_std),
            self.iterations_mean.to_string(),
            self.seconds_mean.to_string(),
            self.best_seed.to_string(),
            self.best_error.to_string(),
            "ok".into(),
        ]
    }

    pub fn from_runs(algorithm: &str, ds: &Dataset, k: usize, runs: &[RunRecord]) -> Self {
        let n = runs.len() as f64;
        let accs: Option<Vec<f64>> = runs.iter().map(|r| r.metrics.accuracy).collect();
        let (accuracy_mean, accuracy_std) = match accs {
            Some(a) if !a.is_empty() => {
                let mean = a.iter().sum::<f64>() / n;
                let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                (Some(mean), Some(var.sqrt()))
            }
            _ => (None, None),
        };
        let best = best_run(runs);
        SummaryRow {
            algorithm: algorithm.to_string(),
            dataset: ds.name.clone(),
            rows: ds.matrix.nrows(),
            cols: ds.matrix.ncols(),
            nnz: ds.matrix.nnz(),
            k,
            runs: runs.len(),
            accuracy_mean,
            accuracy_std,
            iterations_mean: runs.iter().map(|r| r.metrics.iterations as f64).sum::<f64>() / n,
            seconds_mean: runs.iter().map(|r| r.metrics.seconds).sum::<f64>() / n,
            best_seed: best.seed,
            best_error: best.metrics.final_error,
        }
    }
}

/// Smallest reconstruction error; the earliest seed wins ties.
pub fn best_run(runs: &[RunRecord]) -> &RunRecord {
    runs.iter()
        .reduce(|a, b| if b.metrics.final_error < a.metrics.final_error { b } else { a })
        .expect("at least one run")
}

/// Worker pool honouring `ONMFKIT_THREADS`.
pub fn thread_pool() -> Result<ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ONMFKIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("ONMFKIT_THREADS must be a positive integer, got `{v}`"))?;
        builder = builder.num_threads(n.max(1));
    }
    Ok(builder.build()?)
}

pub fn resolve_k(cfg_k: Option<usize>, ds: &Dataset) -> Result<usize> {
    cfg_k
        .or(ds.expected_k)
        .with_context(|| format!("no k given and dataset `{}` does not suggest one", ds.name))
}

/// Runs seeds `base_seed .. base_seed + repetitions`; results come back in
/// seed order whatever the worker count.
pub fn execute(cfg: &ExperimentConfig, ds: &Dataset, registry: &Registry, pool: &ThreadPool) -> Result<Vec<RunRecord>> {
    let alg = registry.get(&cfg.algorithm)?;
    let k = resolve_k(cfg.k, ds)?;
    let mut reps = cfg.repetitions;
    if alg.is_deterministic() && reps > 1 {
        warn!("{} is deterministic; running once instead of {reps} times", alg.name());
        reps = 1;
    }
    let seeds: Vec<u64> = (0..reps as u64).map(|i| cfg.base_seed + i).collect();
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let params = RunParams {
                    k,
                    seed,
                    max_iter: cfg.max_iter,
                    onp: cfg.onp.clone(),
                };
                let start = Instant::now();
                let output = alg
                    .run(&ds.matrix, &params)
                    .with_context(|| format!("{} failed on {} (seed {seed})", alg.name(), ds.name))?;
                let seconds = io::round_seconds(start.elapsed().as_secs_f64());
                let acc = match &ds.labels {
                    Some(l) => Some(accuracy(&output.partition, l)?),
                    None => None,
                };
                let metrics = RunMetrics {
                    algorithm: alg.name().to_string(),
                    dataset: ds.name.clone(),
                    k,
                    seed,
                    accuracy: acc,
                    iterations: output.iterations,
                    seconds,
                    final_error: output.final_error,
                    final_orth_residual: output.final_orth_residual,
                    final_neg_residual: output.final_neg_residual,
                };
                Ok(RunRecord { seed, metrics, output })
            })
            .collect()
    })
}

/// `runs/seed-<s>/` per run (metrics, assignments, trace) and `best/` with
/// the complete output of the best run, factors included.
pub fn write_runs(out: &Path, runs: &[RunRecord]) -> Result<()> {
    for r in runs {
        let dir = out.join("runs").join(format!("seed-{}", r.seed));
        std::fs::create_dir_all(&dir)?;
        io::write_metrics(&dir.join("metrics.json"), &r.metrics)?;
        io::write_assignments(&dir.join("assignments.csv"), &r.output.partition)?;
        io::write_trace(&dir.join("trace.csv"), &r.output.trace)?;
    }
    let best = best_run(runs);
    io::write_results(
        &RunOutputs {
            partition: &best.output.partition,
            trace: &best.output.trace,
            metrics: &best.metrics,
            factorization: &best.output.factorization,
        },
        &out.join("best"),
    )?;
    Ok(())
}

pub enum TableRow {
    Done(SummaryRow),
    Failed {
        algorithm: String,
        dataset: String,
        reason: String,
    },
}

pub fn write_table_csv(path: &Path, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        match row {
            TableRow::Done(s) => w.write_record(s.record())?,
            TableRow::Failed {
                algorithm,
                dataset,
                reason,
            } => {
                let mut rec = vec![String::new(); SUMMARY_HEADER.len()];
                rec[0] = algorithm.clone();
                rec[1] = dataset.clone();
                rec[SUMMARY_HEADER.len() - 1] = format!("FAILED: {reason}");
                w.write_record(rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table in the layout of the accuracy/time tables.
pub fn pretty_table(rows: &[TableRow]) -> String {
    let mut lines = vec![format!(
        "{:<10} {:<24} {:>8} {:>8} {:>4} {:>5} {:>17} {:>9} {:>9}",
        "algorithm", "dataset", "rows", "cols", "k", "runs", "accuracy", "iters", "seconds"
    )];
    for row in rows {
        lines.push(match row {
            TableRow::Done(s) => {
                let acc = match (s.accuracy_mean, s.accuracy_std) {
                    (Some(m), Some(sd)) => format!("{m:.3} ± {sd:.3}"),
                    _ => "-".into(),
                };
                format!(
                    "{:<10} {:<24} {:>8} {:>8} {:>4} {:>5} {:>17} {:>9.1} {:>9.3}",
                    s.algorithm, s.dataset, s.rows, s.cols, s.k, s.runs, acc, s.iterations_mean, s.seconds_mean
                )
            }
            TableRow::Failed {
                algorithm,
                dataset,
                reason,
            } => format!("{algorithm:<10} {dataset:<24} FAILED: {reason}"),
        });
    }
    lines.join("\n") + "\n"
}
