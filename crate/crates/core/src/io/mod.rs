//! Dataset ingestion and result files.

pub mod cluto;
pub mod results;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{self, SwimmerParams};
use crate::error::{OnmfError, Result};
use crate::linalg::DataMatrix;

pub use cluto::{read_labels, read_sparse_matrix, read_sparse_text_matrix, write_labels, write_sparse_matrix};
pub use results::{
    read_assignments, read_matrix_csv, read_metrics, read_trace, round_seconds, write_assignments, write_factors,
    write_matrix_csv, write_metrics, write_results, write_trace, RunMetrics, RunOutputs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    /// Sparse text, see [`cluto`].
    Cluto,
    /// Headerless dense CSV, one matrix row per line.
    Csv,
}

impl FileFormat {
    /// `.csv` means dense CSV, anything else sparse text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Cluto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionalPreset {
    Separated,
    Inline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<FileFormat>,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    Swimmer {
        #[serde(default = "default_side")]
        image_side: usize,
        #[serde(default = "default_limb")]
        limb_length: usize,
    },
    Directional {
        preset: DirectionalPreset,
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_side() -> usize {
    SwimmerParams::default().image_side
}

fn default_limb() -> usize {
    SwimmerParams::default().limb_length
}

fn default_count() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Remove all-zero columns before clustering. Labels follow the kept
    /// columns.
    #[serde(default)]
    pub drop_zero_columns: bool,
    /// Cluster rows instead of columns.
    #[serde(default)]
    pub transpose: bool,
    /// Suggested number of clusters when none is given explicitly.
    #[serde(default)]
    pub expected_k: Option<usize>,
}

impl DatasetSpec {
    pub fn file(path: impl Into<PathBuf>, labels: Option<PathBuf>) -> Self {
        Self::from_source(DatasetSource::File {
            path: path.into(),
            format: None,
            labels,
        })
    }

    pub fn from_source(source: DatasetSource) -> Self {
        Self {
            source,
            drop_zero_columns: false,
            transpose: false,
            expected_k: None,
        }
    }

    /// Short display name: the file stem or the generator name.
    pub fn name(&self) -> String {
        match &self.source {
            DatasetSource::File { path, .. } => path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
            DatasetSource::Swimmer { .. } => "swimmer".into(),
            DatasetSource::Directional { preset, .. } => match preset {
                DirectionalPreset::Separated => "directional-separated".into(),
                DirectionalPreset::Inline => "directional-inline".into(),
            },
        }
    }
}

/// A loaded dataset. Columns are the points to cluster.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub matrix: DataMatrix,
    pub labels: Option<Vec<usize>>,
    pub class_names: Vec<String>,
    /// Original index of every retained column.
    pub columns: Vec<usize>,
    pub expected_k: Option<usize>,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let (matrix, labels, class_names, natural_k) = match &spec.source {
        DatasetSource::File { path, format, labels } => {
            let format = format.unwrap_or_else(|| FileFormat::from_path(path));
            let m = match format {
                FileFormat::Cluto => read_sparse_matrix(path)?,
                FileFormat::Csv => DataMatrix::dense(read_matrix_csv(path)?)?,
            };
            match labels {
                Some(lp) => {
                    let (l, names) = read_labels(lp)?;
                    let k = names.len();
                    (m, Some(l), names, Some(k))
                }
                None => (m, None, Vec::new(), None),
            }
        }
        DatasetSource::Swimmer {
            image_side,
            limb_length,
        } => {
            let s = datasets::generate_swimmer(&SwimmerParams {
                image_side: *image_side,
                limb_length: *limb_length,
            })?;
            let background = datasets::SWIMMER_PARTS;
            let labels: Vec<usize> = s.pixel_labels().into_iter().map(|l| l.unwrap_or(background)).collect();
            let mut names: Vec<String> = (0..background).map(|i| format!("part{i}")).collect();
            names.push("background".into());
            (s.matrix, Some(labels), names, Some(background))
        }
        DatasetSource::Directional { preset, count, seed } => {
            let clusters = match preset {
                DirectionalPreset::Separated => datasets::separated_clusters(*count),
                DirectionalPreset::Inline => datasets::inline_clusters(*count),
            };
            let ds = datasets::generate_directional_clusters(&clusters, *seed)?;
            let k = ds.num_classes();
            (ds.matrix, Some(ds.labels), ds.class_names, Some(k))
        }
    };
    if spec.transpose && labels.is_some() {
        return Err(OnmfError::InvalidConfig("labels describe columns; cannot transpose a labeled dataset".into()));
    }
    let matrix = if spec.transpose { matrix.transpose() } else { matrix };
    if let Some(l) = &labels {
        if l.len() != matrix.ncols() {
            return Err(OnmfError::DimensionMismatch(format!(
                "{} labels for {} columns",
                l.len(),
                matrix.ncols()
            )));
        }
    }
    let mut ds = Dataset {
        name: spec.name(),
        columns: (0..matrix.ncols()).collect(),
        matrix,
        labels,
        class_names,
        expected_k: spec.expected_k.or(natural_k),
    };
    if spec.drop_zero_columns {
        ds = drop_zero_columns(ds);
    }
    Ok(ds)
}

/// Keeps nonzero columns only; classes that lose all members are removed
/// and the remaining ones renumbered in order.
pub fn drop_zero_columns(ds: Dataset) -> Dataset {
    let keep = ds.matrix.nonzero_columns();
    if keep.len() == ds.matrix.ncols() {
        return ds;
    }
    let matrix = ds.matrix.select_columns(&keep);
    let (labels, class_names) = match ds.labels {
        Some(l) => {
            let mut present = vec![false; ds.class_names.len()];
            keep.iter().for_each(|&j| present[l[j]] = true);
            let mut rank = vec![0; present.len()];
            let mut class_names = Vec::new();
            for (c, _) in present.iter().enumerate().filter(|(_, &p)| p) {
                rank[c] = class_names.len();
                class_names.push(ds.class_names[c].clone());
            }
            (Some(keep.iter().map(|&j| rank[l[j]]).collect()), class_names)
        }
        None => (None, ds.class_names),
    };
    Dataset {
        name: ds.name,
        columns: keep.iter().map(|&j| ds.columns[j]).collect(),
        matrix,
        labels,
        class_names,
        expected_k: ds.expected_k,
    }
}
