//! Orthogonal nonnegative matrix factorization.
//!
//! Factor a nonnegative `m x n` matrix as `M ~ U V` with `U >= 0`, `V >= 0`
//! and `V V^T = I`. Orthogonality plus nonnegativity forces every column of
//! `V` to have at most one nonzero, so the factorization is a clustering of
//! the columns of `M`, and minimizing `||M - UV||_F` is a weighted spherical
//! k-means.
//!
//! Two solvers:
//!
//! - [`em_onmf`]: alternate cluster assignment and per-cluster rank-one
//!   fits. Exact on the constraint set, converges to a fixed point.
//! - [`onp_mf`]: augmented Lagrangian that keeps `V` orthonormal and drives
//!   it to nonnegativity. Deterministic from an SVD start.
//!
//! [`baselines`] holds Euclidean and spherical k-means; [`registry`] puts all
//! four behind one trait.
//!
//! ```
//! use ndarray::array;
//! use onmfkit::{DataMatrix, Registry, RunParams};
//!
//! let m = DataMatrix::dense(array![[1.0, 2.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
//! let out = Registry::with_defaults().get("em-onmf").unwrap().run(&m, &RunParams::new(2, 0)).unwrap();
//! let a = out.partition.assignment();
//! assert_eq!(a[0], a[1]);
//! assert_ne!(a[0], a[2]);
//! ```

pub mod baselines;
pub mod datasets;
pub mod em_onmf;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod onp_mf;
pub mod partition;
pub mod registry;
pub mod trace;

pub use error::{OnmfError, Result};
pub use linalg::{CscMatrix, DataMatrix, OrthonormalRows};
pub use metrics::LabeledDataset;
pub use partition::{CentroidSet, Factorization, Partition};
pub use registry::{Algorithm, Registry, RunOutput, RunParams};
pub use trace::{RunTrace, TraceRow};
