//! EM-like alternation for orthogonal NMF.
//!
//! With `V` restricted to disjoint row supports and `||u_i|| = 1`, the ONMF
//! objective splits over clusters: `||M - UV||_F^2 = ||M||_F^2 - sum_i
//! ||M_i^T u_i||^2`. Minimizing it is a weighted spherical k-means problem.
//! The E-step sends each column to the centroid with the largest inner
//! product; the M-step replaces each centroid by the nonnegative dominant
//! left singular vector of its cluster's submatrix, so both half-steps are
//! exact and the objective never increases.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OnmfError, Result};
use crate::linalg::{nonneg_dominant_left_vector, DataMatrix};
use crate::partition::{CentroidSet, Factorization, Partition};
use crate::trace::{RunTrace, TraceRow};

pub const DEFAULT_MAX_ITER: usize = 500;

/// Column `j` goes to `argmax_l m_j^T u_l`, ties to the lowest index. A zero
/// column ties everywhere and lands in cluster 0.
pub fn assign_clusters(m: &DataMatrix, centroids: &CentroidSet) -> Partition {
    let k = centroids.k();
    let cols: Vec<Vec<f64>> = (0..k).map(|i| centroids.column(i)).collect();
    let assignment = (0..m.ncols())
        .map(|j| {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (l, u) in cols.iter().enumerate() {
                let val = m.column_dot(j, u);
                if val > best_val {
                    best_val = val;
                    best = l;
                }
            }
            best
        })
        .collect();
    Partition::new(assignment, k).expect("argmax stays in range")
}

#[derive(Debug, Clone)]
pub struct CentroidUpdate {
    pub centroids: CentroidSet,
    /// `||M_i^T u_i||_2` per cluster (`sigma_1(M_i)` on convergence).
    pub captured: Vec<f64>,
    /// Clusters whose submatrix was empty or all zero; they received `e_1`.
    pub zero_clusters: Vec<usize>,
    /// Clusters whose power iteration hit its cap.
    pub unconverged: Vec<usize>,
}

/// `u_i` = nonnegative dominant left singular vector of `M(:, pi_i)`.
pub fn update_centroids(m: &DataMatrix, p: &Partition) -> Result<CentroidUpdate> {
    if p.n() != m.ncols() {
        return Err(OnmfError::DimensionMismatch(format!(
            "partition covers {} columns, matrix has {}",
            p.n(),
            m.ncols()
        )));
    }
    let rows = m.nrows();
    let k = p.k();
    let mut u = Array2::zeros((rows, k));
    let mut captured = vec![0.0; k];
    let mut zero_clusters = Vec::new();
    let mut unconverged = Vec::new();
    for (i, members) in p.clusters().iter().enumerate() {
        let sub = m.select_columns(members);
        match nonneg_dominant_left_vector(&sub) {
            Ok(dir) => {
                for (dst, src) in u.column_mut(i).iter_mut().zip(&dir.vector) {
                    *dst = *src;
                }
                captured[i] = dir.sigma;
                if !dir.converged {
                    unconverged.push(i);
                }
            }
            Err(OnmfError::ZeroMatrix) => {
                u[[0, i]] = 1.0;
                zero_clusters.push(i);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CentroidUpdate {
        centroids: CentroidSet::from_columns_unchecked(u),
        captured,
        zero_clusters,
        unconverged,
    })
}

/// `v_ij = m_j^T u_i` for `j` in cluster `i`, zero elsewhere.
pub fn optimal_coefficients(m: &DataMatrix, centroids: &CentroidSet, p: &Partition) -> Array2<f64> {
    let k = centroids.k();
    let cols: Vec<Vec<f64>> = (0..k).map(|i| centroids.column(i)).collect();
    let mut v = Array2::zeros((k, m.ncols()));
    for j in 0..m.ncols() {
        let i = p.cluster_of(j);
        v[[i, j]] = m.column_dot(j, &cols[i]).max(0.0);
    }
    v
}

/// `||M||_F^2 - sum_i sigma_1^2(M_i)`; empty clusters contribute nothing.
pub fn onmf_objective(m: &DataMatrix, p: &Partition) -> Result<f64> {
    let mut captured = 0.0;
    for members in p.clusters() {
        if members.is_empty() {
            continue;
        }
        match nonneg_dominant_left_vector(&m.select_columns(&members)) {
            Ok(dir) => captured += dir.sigma * dir.sigma,
            Err(OnmfError::ZeroMatrix) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(m.frobenius_sq() - captured)
}

/// Factorization built from centroids and their optimal coefficients. Since
/// `||m_j - u v_ij||^2 = ||m_j||^2 - v_ij^2`, the objective is exact.
pub fn factorization_from(m: &DataMatrix, centroids: &CentroidSet, p: &Partition) -> Factorization {
    let v = optimal_coefficients(m, centroids, p);
    let objective = m.frobenius_sq() - v.iter().map(|x| x * x).sum::<f64>();
    Factorization {
        u: centroids.as_array().clone(),
        v,
        objective,
    }
}

#[derive(Debug, Clone)]
pub enum EmInit {
    Centroids(CentroidSet),
    Partition(Partition),
    /// Centroids drawn among the nonzero data columns.
    RandomColumns,
}

#[derive(Debug, Clone)]
pub struct EmOnmfOptions {
    pub max_iter: usize,
    /// Seeds the initial column draw and every empty-cluster repair.
    pub seed: u64,
}

impl Default for EmOnmfOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmOnmfOutput {
    pub factorization: Factorization,
    pub partition: Partition,
    pub centroids: CentroidSet,
    pub trace: RunTrace,
    /// Objective after every iteration.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of centroid updates that hit an all-zero cluster.
    pub zero_cluster_events: usize,
}

/// `k` distinct nonzero columns, normalized. Pads with canonical basis
/// vectors when fewer than `k` nonzero columns exist.
pub fn random_column_centroids(m: &DataMatrix, k: usize, rng: &mut ChaCha8Rng) -> CentroidSet {
    let nonzero = m.nonzero_columns();
    let rows = m.nrows();
    let mut u = Array2::zeros((rows, k));
    let take = k.min(nonzero.len());
    let picks = sample(rng, nonzero.len(), take);
    for (i, idx) in picks.iter().enumerate() {
        let col = m.column(nonzero[idx]);
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (dst, x) in u.column_mut(i).iter_mut().zip(col) {
            *dst = x / norm;
        }
    }
    for i in take..k {
        u[[i % rows, i]] = 1.0;
    }
    CentroidSet::from_columns_unchecked(u)
}

pub fn em_onmf(m: &DataMatrix, k: usize, init: EmInit, opts: &EmOnmfOptions) -> Result<EmOnmfOutput> {
    let n = m.ncols();
    if k == 0 || n < k {
        return Err(OnmfError::Infeasible { n, k });
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let total = m.frobenius_sq();
    let mut zero_cluster_events = 0;

    let (mut centroids, mut previous) = match init {
        EmInit::Centroids(c) => {
            if c.k() != k || c.m() != m.nrows() {
                return Err(OnmfError::DimensionMismatch(format!(
                    "initial centroids are {}x{}, expected {}x{k}",
                    c.m(),
                    c.k(),
                    m.nrows()
                )));
            }
            (c, None)
        }
        EmInit::Partition(p) => {
            if p.k() != k || p.n() != n {
                return Err(OnmfError::DimensionMismatch(
                    "initial partition does not match the data".into(),
                ));
            }
            let p = p.repair_empty_clusters(&mut rng)?;
            let update = update_centroids(m, &p)?;
            zero_cluster_events += update.zero_clusters.len();
            (update.centroids, Some(p))
        }
        EmInit::RandomColumns => (random_column_centroids(m, k, &mut rng), None),
    };

    let mut trace = RunTrace::default();
    let mut objectives = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut partition = previous.clone();
    while iterations < opts.max_iter {
        iterations += 1;
        let p = assign_clusters(m, &centroids).repair_empty_clusters(&mut rng)?;
        let update = update_centroids(m, &p)?;
        zero_cluster_events += update.zero_clusters.len();
        centroids = update.centroids;
        let objective = total - update.captured.iter().map(|s| s * s).sum::<f64>();
        objectives.push(objective);
        trace.push(TraceRow {
            iteration: iterations,
            error: objective.max(0.0).sqrt(),
            neg_residual: 0.0,
            orth_residual: 0.0,
            beta: None,
            rho: None,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let stable = previous.as_ref() == Some(&p);
        partition = Some(p.clone());
        previous = Some(p);
        if stable {
            converged = true;
            break;
        }
    }
    let partition = match partition {
        Some(p) => p,
        None => assign_clusters(m, &centroids).repair_empty_clusters(&mut rng)?,
    };
    let factorization = factorization_from(m, &centroids, &partition);
    Ok(EmOnmfOutput {
        factorization,
        partition,
        centroids,
        trace,
        objectives,
        iterations,
        converged,
        zero_cluster_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense(a: Array2<f64>) -> DataMatrix {
        DataMatrix::dense(a).unwrap()
    }

    fn orthogonal_centroids() -> CentroidSet {
        CentroidSet::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn column_equal_to_second_centroid() {
        let m = dense(array![[0.0], [1.0]]);
        assert_eq!(assign_clusters(&m, &orthogonal_centroids()).assignment(), &[1]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let m = dense(array![[1.0, 0.0], [1.0, 0.0]]);
        // second column is zero: ties everywhere
        assert_eq!(assign_clusters(&m, &orthogonal_centroids()).assignment(), &[0, 0]);
    }

    #[test]
    fn assignment_ignores_positive_scaling() {
        let c = CentroidSet::new(array![[0.6, 1.0], [0.8, 0.0]]).unwrap();
        let base = dense(array![[1.0, 3.0], [2.0, 0.5]]);
        let scaled = dense(array![[1e3, 3e-4], [2e3, 0.5e-4]]);
        assert_eq!(assign_clusters(&base, &c), assign_clusters(&scaled, &c));
    }

    #[test]
    fn identical_columns_give_normalized_centroid() {
        let m = dense(array![[3.0, 3.0, 0.0], [4.0, 4.0, 0.0], [0.0, 0.0, 2.0]]);
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        let up = update_centroids(&m, &p).unwrap();
        let c = up.centroids.as_array();
        assert!((c[[0, 0]] - 0.6).abs() < 1e-12);
        assert!((c[[1, 0]] - 0.8).abs() < 1e-12);
        assert!((c[[2, 1]] - 1.0).abs() < 1e-12);
        assert!(up.zero_clusters.is_empty());
    }

    #[test]
    fn zero_cluster_gets_canonical_vector() {
        let m = dense(array![[1.0, 0.0], [1.0, 0.0]]);
        let p = Partition::new(vec![0, 1], 2).unwrap();
        let up = update_centroids(&m, &p).unwrap();
        assert_eq!(up.zero_clusters, vec![1]);
        assert_eq!(up.centroids.column(1), vec![1.0, 0.0]);
    }

    #[test]
    fn coefficients_follow_dot_products() {
        let m = dense(array![[3.0, 1.0], [4.0, 0.0]]);
        let c = CentroidSet::new(array![[0.6, 0.0], [0.8, 1.0]]).unwrap();
        let p = Partition::new(vec![0, 1], 2).unwrap();
        let v = optimal_coefficients(&m, &c, &p);
        assert!((v[[0, 0]] - 5.0).abs() < 1e-12);
        assert_eq!(v[[1, 0]], 0.0);
        assert_eq!(v[[0, 1]], 0.0);
        // second column is orthogonal to its centroid
        assert_eq!(v[[1, 1]], 0.0);
    }

    #[test]
    fn singleton_clusters_have_zero_objective() {
        let m = dense(array![[1.0, 2.0, 0.0], [0.5, 0.0, 3.0]]);
        let p = Partition::new(vec![0, 1, 2], 3).unwrap();
        assert!(onmf_objective(&m, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rank_one_single_cluster() {
        let m = dense(array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]);
        let p = Partition::new(vec![0, 0, 0], 1).unwrap();
        assert!(onmf_objective(&m, &p).unwrap().abs() < 1e-10);
    }

    #[test]
    fn separable_groups_are_recovered() {
        let m = dense(array![
            [1.0, 2.0, 0.0, 0.0, 0.5],
            [1.0, 2.0, 0.0, 0.0, 0.5],
            [0.0, 0.0, 3.0, 1.0, 0.0],
        ]);
        let out = em_onmf(&m, 2, EmInit::RandomColumns, &EmOnmfOptions { seed: 4, ..Default::default() }).unwrap();
        assert!(out.converged);
        let a = out.partition.assignment();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[0], a[4]);
        assert_eq!(a[2], a[3]);
        assert_ne!(a[0], a[2]);
        assert!(out.factorization.objective.abs() < 1e-10);
    }

    #[test]
    fn k_equal_one() {
        let m = dense(array![[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]]);
        let out = em_onmf(&m, 1, EmInit::RandomColumns, &EmOnmfOptions::default()).unwrap();
        let sigma1_sq = m.frobenius_sq() - out.factorization.objective;
        // sigma_1^2 of [[1,0,2],[0,1,1]]: eigenvalues of M M^T = [[5,2],[2,2]] are 6 and 1
        assert!((sigma1_sq - 6.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_k() {
        let m = dense(array![[1.0, 2.0]]);
        assert!(matches!(
            em_onmf(&m, 3, EmInit::RandomColumns, &EmOnmfOptions::default()),
            Err(OnmfError::Infeasible { n: 2, k: 3 })
        ));
    }
}
