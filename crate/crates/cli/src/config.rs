//! Experiment and suite configuration. Files are TOML; every key of
//! `[run]`-style configs can be overridden from the command line.
//!
//! ```toml
//! algorithm = "em-onmf"
//! k = 17
//! repetitions = 30
//! base_seed = 0
//! out = "runs/swimmer"
//!
//! [dataset]
//! kind = "swimmer"
//! drop_zero_columns = true
//!
//! [onp]
//! alpha0 = 100.0
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use onmfkit::io::{DatasetSource, DatasetSpec, DirectionalPreset};
use onmfkit::onp_mf::OnpMfConfig;
use serde::Deserialize;

/// Optional overrides of the ONP-MF parameters.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnpOverrides {
    pub alpha0: Option<f64>,
    pub rho0: Option<f64>,
    pub growth: Option<f64>,
    pub beta0: Option<f64>,
    pub beta_cap: Option<f64>,
    pub neg_tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl OnpOverrides {
    pub fn merge(&mut self, other: &OnpOverrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(alpha0, rho0, growth, beta0, beta_cap, neg_tol, max_iter);
    }

    pub fn apply(&self, base: OnpMfConfig) -> OnpMfConfig {
        OnpMfConfig {
            alpha0: self.alpha0.unwrap_or(base.alpha0),
            rho0: self.rho0.unwrap_or(base.rho0),
            growth: self.growth.unwrap_or(base.growth),
            beta0: self.beta0.unwrap_or(base.beta0),
            beta_cap: self.beta_cap.unwrap_or(base.beta_cap),
            neg_tol: self.neg_tol.unwrap_or(base.neg_tol),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            ..base
        }
    }
}

/// File form of a single experiment; all fields optional so flags can fill
/// the gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub algorithm: Option<String>,
    pub dataset: Option<DatasetSpec>,
    pub k: Option<usize>,
    pub repetitions: Option<usize>,
    pub base_seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub onp: OnpOverrides,
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: String,
    pub dataset: DatasetSpec,
    /// Falls back to the dataset's expected number of clusters.
    pub k: Option<usize>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub max_iter: Option<usize>,
    pub onp: OnpMfConfig,
    pub out: PathBuf,
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` wins over `base` wherever it is set.
    pub fn over(self, base: ExperimentFile) -> ExperimentFile {
        let mut onp = base.onp;
        onp.merge(&self.onp);
        ExperimentFile {
            algorithm: self.algorithm.or(base.algorithm),
            dataset: self.dataset.or(base.dataset),
            k: self.k.or(base.k),
            repetitions: self.repetitions.or(base.repetitions),
            base_seed: self.base_seed.or(base.base_seed),
            max_iter: self.max_iter.or(base.max_iter),
            out: self.out.or(base.out),
            onp,
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let Some(algorithm) = self.algorithm else {
            bail!("no algorithm given (use --algorithm or `algorithm = ...` in the config)");
        };
        let Some(dataset) = self.dataset else {
            bail!("no dataset given (use --dataset or a [dataset] table in the config)");
        };
        let repetitions = self.repetitions.unwrap_or(1);
        if repetitions == 0 {
            bail!("repetitions must be >= 1");
        }
        if self.k == Some(0) {
            bail!("k must be >= 1");
        }
        let onp = self.onp.apply(OnpMfConfig::default());
        onp.validate()?;
        Ok(ExperimentConfig {
            algorithm,
            dataset,
            k: self.k,
            repetitions,
            base_seed: self.base_seed.unwrap_or(0),
            max_iter: self.max_iter,
            onp,
            out: self.out.unwrap_or_else(|| PathBuf::from("onmfkit-out")),
        })
    }
}

/// `swimmer`, `directional-inline`, `directional-separated`, or a file path.
pub fn dataset_from_arg(arg: &str, labels: Option<PathBuf>) -> Result<DatasetSpec> {
    let generated = match arg {
        "swimmer" => Some(DatasetSource::Swimmer {
            image_side: 32,
            limb_length: 6,
        }),
        "directional-inline" | "directional-separated" => Some(DatasetSource::Directional {
            preset: if arg.ends_with("inline") {
                DirectionalPreset::Inline
            } else {
                DirectionalPreset::Separated
            },
            count: 100,
            seed: 0,
        }),
        _ => None,
    };
    match generated {
        Some(source) => {
            if labels.is_some() {
                bail!("--labels only applies to file datasets");
            }
            Ok(DatasetSpec::from_source(source))
        }
        None => Ok(DatasetSpec::file(arg, labels)),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub algorithms: Vec<String>,
    #[serde(default)]
    pub datasets: Vec<DatasetSpec>,
    /// Clusters for every dataset; each dataset's `expected_k` otherwise.
    pub k: Option<usize>,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub onp: OnpOverrides,
}

fn one() -> usize {
    1
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let suite: SuiteConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if suite.repetitions == 0 {
            bail!("repetitions must be >= 1");
        }
        Ok(suite)
    }
}
