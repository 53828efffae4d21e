//! Algorithms behind one trait, looked up by name at run time.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::Array2;

use crate::baselines::{kmeans, spherical_kmeans, BaselineOptions};
use crate::em_onmf::{em_onmf, EmInit, EmOnmfOptions};
use crate::error::{OnmfError, Result};
use crate::linalg::DataMatrix;
use crate::metrics::{negativity_residual, normalized_orthogonality_residual, reconstruction_error};
use crate::onp_mf::{onp_mf, OnpMfConfig};
use crate::partition::{Factorization, Partition};
use crate::trace::{RunTrace, TraceRow};

/// Per-run inputs shared by every algorithm. Fields an algorithm has no use
/// for are ignored.
#[derive(Debug, Clone)]
pub struct RunParams {
    pub k: usize,
    pub seed: u64,
    /// Overrides the algorithm's own iteration cap.
    pub max_iter: Option<usize>,
    pub onp: OnpMfConfig,
}

impl RunParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: None,
            onp: OnpMfConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub partition: Partition,
    pub factorization: Factorization,
    pub trace: RunTrace,
    pub iterations: usize,
    pub converged: bool,
    /// `||M - UV||_F` of the returned factors.
    pub final_error: f64,
    /// Orthogonality residual of `V` with rows scaled to unit norm.
    pub final_orth_residual: f64,
    /// Relative negative mass of the last iterate, before any clamping.
    pub final_neg_residual: f64,
}

impl RunOutput {
    fn finish(m: &DataMatrix, partition: Partition, factorization: Factorization, trace: RunTrace, iterations: usize, converged: bool, last_v: Option<&Array2<f64>>) -> Self {
        let final_error = reconstruction_error(m, factorization.u.view(), factorization.v.view());
        let final_orth_residual = normalized_orthogonality_residual(factorization.v.view());
        let final_neg_residual = negativity_residual(last_v.unwrap_or(&factorization.v).view());
        Self {
            partition,
            factorization,
            trace,
            iterations,
            converged,
            final_error,
            final_orth_residual,
            final_neg_residual,
        }
    }
}

pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;

    /// Deterministic algorithms ignore the seed, so one repetition suffices.
    fn is_deterministic(&self) -> bool {
        false
    }

    fn run(&self, m: &DataMatrix, params: &RunParams) -> Result<RunOutput>;
}

fn objective_trace(objectives: &[f64]) -> RunTrace {
    let mut trace = RunTrace::default();
    for (i, &o) in objectives.iter().enumerate() {
        trace.push(TraceRow {
            iteration: i + 1,
            error: o.max(0.0).sqrt(),
            neg_residual: 0.0,
            orth_residual: 0.0,
            beta: None,
            rho: None,
            elapsed_ms: 0.0,
        });
    }
    trace
}

/// Iteration cap for the randomly initialized methods when run from the
/// command line.
pub const RANDOM_INIT_MAX_ITER: usize = 5000;

pub struct EmOnmf;

impl Algorithm for EmOnmf {
    fn name(&self) -> &'static str {
        "em-onmf"
    }

    fn run(&self, m: &DataMatrix, params: &RunParams) -> Result<RunOutput> {
        let opts = EmOnmfOptions {
            max_iter: params.max_iter.unwrap_or(RANDOM_INIT_MAX_ITER),
            seed: params.seed,
        };
        let out = em_onmf(m, params.k, EmInit::RandomColumns, &opts)?;
        Ok(RunOutput::finish(m, out.partition, out.factorization, out.trace, out.iterations, out.converged, None))
    }
}

pub struct OnpMf;

impl Algorithm for OnpMf {
    fn name(&self) -> &'static str {
        "onp-mf"
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn run(&self, m: &DataMatrix, params: &RunParams) -> Result<RunOutput> {
        let mut cfg = params.onp.clone();
        if let Some(cap) = params.max_iter {
            cfg.max_iter = cap;
        }
        let out = onp_mf(m, params.k, &cfg)?;
        Ok(RunOutput::finish(
            m,
            out.partition,
            out.factorization,
            out.trace,
            out.iterations,
            out.converged,
            Some(&out.v_unclamped),
        ))
    }
}

pub struct KMeans;

impl Algorithm for KMeans {
    fn name(&self) -> &'static str {
        "kmeans"
    }

    fn run(&self, m: &DataMatrix, params: &RunParams) -> Result<RunOutput> {
        let opts = BaselineOptions {
            max_iter: params.max_iter.unwrap_or(RANDOM_INIT_MAX_ITER),
            seed: params.seed,
        };
        let out = kmeans(m, params.k, &opts)?;
        let f = out.factorization(m);
        let trace = objective_trace(&out.distortions);
        Ok(RunOutput::finish(m, out.partition, f, trace, out.iterations, out.converged, None))
    }
}

pub struct SphericalKMeans;

impl Algorithm for SphericalKMeans {
    fn name(&self) -> &'static str {
        "skm"
    }

    fn run(&self, m: &DataMatrix, params: &RunParams) -> Result<RunOutput> {
        let opts = BaselineOptions {
            max_iter: params.max_iter.unwrap_or(RANDOM_INIT_MAX_ITER),
            seed: params.seed,
        };
        let out = spherical_kmeans(m, params.k, &opts)?;
        let f = out.factorization(m);
        let trace = objective_trace(&[f.objective]);
        Ok(RunOutput::finish(m, out.partition, f, trace, out.iterations, out.converged, None))
    }
}

#[derive(Clone, Default)]
pub struct Registry {
    algorithms: BTreeMap<&'static str, Arc<dyn Algorithm>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `em-onmf`, `onp-mf`, `kmeans` and `skm`.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(EmOnmf));
        r.register(Arc::new(OnpMf));
        r.register(Arc::new(KMeans));
        r.register(Arc::new(SphericalKMeans));
        r
    }

    /// Replaces any algorithm already registered under the same name.
    pub fn register(&mut self, alg: Arc<dyn Algorithm>) {
        self.algorithms.insert(alg.name(), alg);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Algorithm>> {
        self.algorithms
            .get(name)
            .cloned()
            .ok_or_else(|| OnmfError::UnknownAlgorithm(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.algorithms.keys().copied().collect()
    }
}
