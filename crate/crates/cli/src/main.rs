//! `onmfkit` command-line front end.

mod config;
mod experiment;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use onmfkit::datasets::{self, SwimmerParams};
use onmfkit::io::{self, load_dataset, DirectionalPreset};
use onmfkit::Registry;

use config::{dataset_from_arg, ExperimentFile, OnpOverrides, SuiteConfig};
use experiment::{execute, pretty_table, resolve_k, thread_pool, write_runs, write_table_csv, SummaryRow, TableRow};

/// Exit status when a bench suite finished with failed rows.
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "onmfkit", version, about = "Orthogonal nonnegative matrix factorization and clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one dataset for one or more seeds.
    Run(RunArgs),
    /// Write a synthetic dataset to disk.
    Gen {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Run every algorithm of a suite on every dataset and tabulate.
    Bench(BenchArgs),
}

#[derive(Args, Default)]
struct OnpArgs {
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long)]
    rho0: Option<f64>,
    #[arg(long)]
    growth: Option<f64>,
    #[arg(long)]
    neg_tol: Option<f64>,
    #[arg(long)]
    beta_cap: Option<f64>,
}

impl OnpArgs {
    fn overrides(&self) -> OnpOverrides {
        OnpOverrides {
            alpha0: self.alpha0,
            rho0: self.rho0,
            growth: self.growth,
            neg_tol: self.neg_tol,
            beta_cap: self.beta_cap,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// em-onmf, onp-mf, kmeans or skm.
    #[arg(long)]
    algorithm: Option<String>,
    /// Matrix file (`.csv` dense, otherwise sparse text), `swimmer`,
    /// `directional-inline` or `directional-separated`.
    #[arg(long)]
    dataset: Option<String>,
    /// One class label per column.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Drop all-zero columns before clustering.
    #[arg(long)]
    drop_zero_columns: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[command(flatten)]
    onp: OnpArgs,
}

#[derive(Subcommand)]
enum Generator {
    /// 256 swimmer images as a sparse matrix, plus part and label files.
    Swimmer {
        #[arg(long, default_value_t = 32)]
        image_side: usize,
        #[arg(long, default_value_t = 6)]
        limb_length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two directional point clusters as a dense CSV plus labels.
    Directional {
        #[arg(long, value_parser = ["inline", "separated"])]
        preset: String,
        /// Points per cluster.
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// TOML suite: `algorithms`, `[[datasets]]`, `repetitions`, ...
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[command(flatten)]
    onp: OnpArgs,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let base = match &args.config {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::default(),
    };
    let dataset = match &args.dataset {
        Some(d) => {
            let mut spec = dataset_from_arg(d, args.labels.clone())?;
            spec.drop_zero_columns = args.drop_zero_columns;
            Some(spec)
        }
        None => {
            if args.labels.is_some() {
                anyhow::bail!("--labels needs --dataset");
            }
            None
        }
    };
    let mut flags = ExperimentFile {
        algorithm: args.algorithm,
        dataset,
        k: args.k,
        repetitions: args.reps,
        base_seed: args.seed,
        max_iter: args.max_iter,
        out: args.out,
        onp: args.onp.overrides(),
    };
    if args.drop_zero_columns && flags.dataset.is_none() {
        let mut spec = base.dataset.clone().context("--drop-zero-columns needs a dataset")?;
        spec.drop_zero_columns = true;
        flags.dataset = Some(spec);
    }
    let cfg = flags.over(base).resolve()?;
    let registry = Registry::with_defaults();
    registry.get(&cfg.algorithm)?;
    let ds = load_dataset(&cfg.dataset).with_context(|| format!("loading dataset `{}`", cfg.dataset.name()))?;
    let k = resolve_k(cfg.k, &ds)?;
    info!("{} on {} ({}x{}, k = {k})", cfg.algorithm, ds.name, ds.matrix.nrows(), ds.matrix.ncols());
    let runs = execute(&cfg, &ds, &registry, &thread_pool()?)?;
    fs::create_dir_all(&cfg.out)?;
    write_runs(&cfg.out, &runs)?;
    let rows = [TableRow::Done(SummaryRow::from_runs(&cfg.algorithm, &ds, k, &runs))];
    write_table_csv(&cfg.out.join("summary.csv"), &rows)?;
    let table = pretty_table(&rows);
    fs::write(cfg.out.join("summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_gen(generator: Generator) -> Result<()> {
    match generator {
        Generator::Swimmer {
            image_side,
            limb_length,
            out,
        } => {
            let s = datasets::generate_swimmer(&SwimmerParams {
                image_side,
                limb_length,
            })?;
            fs::create_dir_all(&out)?;
            io::write_sparse_matrix(&out.join("swimmer.mat"), &s.matrix)?;
            let labels: Vec<usize> = s
                .pixel_labels()
                .into_iter()
                .map(|l| l.unwrap_or(datasets::SWIMMER_PARTS))
                .collect();
            let mut names: Vec<String> = (0..datasets::SWIMMER_PARTS).map(|i| format!("part{i}")).collect();
            names.push("background".into());
            io::write_labels(&out.join("swimmer.labels"), &labels, &names)?;
            write_parts(&out.join("swimmer.parts"), &s.parts)?;
            println!("wrote {} (256 x {})", out.join("swimmer.mat").display(), image_side * image_side);
        }
        Generator::Directional {
            preset,
            count,
            seed,
            out,
        } => {
            let preset = if preset == "inline" {
                DirectionalPreset::Inline
            } else {
                DirectionalPreset::Separated
            };
            let clusters = match preset {
                DirectionalPreset::Inline => datasets::inline_clusters(count),
                DirectionalPreset::Separated => datasets::separated_clusters(count),
            };
            let ds = datasets::generate_directional_clusters(&clusters, seed)?;
            fs::create_dir_all(&out)?;
            let stem = match preset {
                DirectionalPreset::Inline => "directional-inline",
                DirectionalPreset::Separated => "directional-separated",
            };
            let matrix = out.join(format!("{stem}.csv"));
            io::write_matrix_csv(&matrix, ds.matrix.to_dense().view())?;
            io::write_labels(&out.join(format!("{stem}.labels")), &ds.labels, &ds.class_names)?;
            println!("wrote {}", matrix.display());
        }
    }
    Ok(())
}

/// One line per part: its 1-based pixel indices.
fn write_parts(path: &Path, parts: &[Vec<usize>]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for part in parts {
        let line: Vec<String> = part.iter().map(|p| (p + 1).to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Returns whether every row succeeded.
fn cmd_bench(args: BenchArgs) -> Result<bool> {
    let mut suite = SuiteConfig::load(&args.suite)?;
    if let Some(r) = args.reps {
        anyhow::ensure!(r >= 1, "--reps must be >= 1");
        suite.repetitions = r;
    }
    if let Some(s) = args.seed {
        suite.base_seed = s;
    }
    if args.max_iter.is_some() {
        suite.max_iter = args.max_iter;
    }
    suite.onp.merge(&args.onp.overrides());
    let onp = suite.onp.apply(Default::default());
    onp.validate()?;

    let registry = Registry::with_defaults();
    let pool = thread_pool()?;
    fs::create_dir_all(&args.out)?;
    let mut rows = Vec::new();
    for spec in &suite.datasets {
        let name = spec.name();
        let ds = match load_dataset(spec) {
            Ok(ds) => ds,
            Err(e) => {
                for alg in &suite.algorithms {
                    rows.push(TableRow::Failed {
                        algorithm: alg.clone(),
                        dataset: name.clone(),
                        reason: e.to_string(),
                    });
                }
                continue;
            }
        };
        info!("{}: {}x{} with {} nonzeros", ds.name, ds.matrix.nrows(), ds.matrix.ncols(), ds.matrix.nnz());
        for alg in &suite.algorithms {
            let cfg = config::ExperimentConfig {
                algorithm: alg.clone(),
                dataset: spec.clone(),
                k: suite.k,
                repetitions: suite.repetitions,
                base_seed: suite.base_seed,
                max_iter: suite.max_iter,
                onp: onp.clone(),
                out: args.out.join(format!("{alg}__{name}")),
            };
            let outcome = resolve_k(cfg.k, &ds).and_then(|k| {
                let runs = execute(&cfg, &ds, &registry, &pool)?;
                write_runs(&cfg.out, &runs)?;
                Ok(SummaryRow::from_runs(alg, &ds, k, &runs))
            });
            rows.push(match outcome {
                Ok(row) => TableRow::Done(row),
                Err(e) => TableRow::Failed {
                    algorithm: alg.clone(),
                    dataset: name.clone(),
                    reason: format!("{e:#}"),
                },
            });
        }
    }
    write_table_csv(&args.out.join("bench.csv"), &rows)?;
    let table = pretty_table(&rows);
    fs::write(args.out.join("bench.txt"), &table)?;
    print!("{table}");
    Ok(rows.iter().all(|r| matches!(r, TableRow::Done(_))))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Gen { generator } => cmd_gen(generator).map(|_| true),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
