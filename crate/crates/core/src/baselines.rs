//! Euclidean and spherical k-means with the same initialization, repair and
//! stopping conventions as EM-ONMF, so iteration counts are comparable.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::em_onmf::{factorization_from, random_column_centroids};
use crate::error::{OnmfError, Result};
use crate::linalg::{CscMatrix, DataMatrix};
use crate::partition::{CentroidSet, Factorization, Partition};

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            max_iter: crate::em_onmf::DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutput {
    pub partition: Partition,
    /// `m x k` cluster means.
    pub centroids: Array2<f64>,
    /// Sum of squared distances to the assigned mean, after every iteration.
    pub distortions: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansOutput {
    /// `U` = means, `V` = 0/1 indicator; the objective is the distortion.
    pub fn factorization(&self, m: &DataMatrix) -> Factorization {
        let k = self.partition.k();
        let mut v = Array2::zeros((k, m.ncols()));
        for (j, &c) in self.partition.assignment().iter().enumerate() {
            v[[c, j]] = 1.0;
        }
        Factorization {
            u: self.centroids.clone(),
            v,
            objective: distortion(m, &self.centroids, &self.partition),
        }
    }
}

fn squared_distance(m: &DataMatrix, j: usize, norm_sq: f64, c: &[f64], c_sq: f64) -> f64 {
    (norm_sq - 2.0 * m.column_dot(j, c) + c_sq).max(0.0)
}

/// Sum over columns of `||m_j - c_{a(j)}||^2`.
pub fn distortion(m: &DataMatrix, centroids: &Array2<f64>, p: &Partition) -> f64 {
    let cols: Vec<Vec<f64>> = (0..p.k()).map(|i| centroids.column(i).to_vec()).collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    (0..m.ncols())
        .map(|j| {
            let c = p.cluster_of(j);
            squared_distance(m, j, m.column_norm_sq(j), &cols[c], sq[c])
        })
        .sum()
}

fn assign_nearest(m: &DataMatrix, centroids: &Array2<f64>, norms: &[f64]) -> Partition {
    let k = centroids.ncols();
    let cols: Vec<Vec<f64>> = (0..k).map(|i| centroids.column(i).to_vec()).collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    let assignment = (0..m.ncols())
        .map(|j| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for i in 0..k {
                let d = squared_distance(m, j, norms[j], &cols[i], sq[i]);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect();
    Partition::new(assignment, k).expect("argmin stays in range")
}

fn cluster_means(m: &DataMatrix, p: &Partition) -> Array2<f64> {
    let mut c = Array2::zeros((m.nrows(), p.k()));
    for (i, members) in p.clusters().iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut sum = vec![0.0; m.nrows()];
        for &j in members {
            m.axpy_column(j, 1.0, &mut sum);
        }
        let inv = 1.0 / members.len() as f64;
        for (dst, s) in c.column_mut(i).iter_mut().zip(sum) {
            *dst = s * inv;
        }
    }
    c
}

/// Lloyd iterations from `k` distinct random data columns.
pub fn kmeans(m: &DataMatrix, k: usize, opts: &BaselineOptions) -> Result<KMeansOutput> {
    let n = m.ncols();
    if k == 0 || n < k {
        return Err(OnmfError::Infeasible { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centroids = Array2::zeros((m.nrows(), k));
    for (i, j) in sample(&mut rng, n, k).iter().enumerate() {
        for (dst, x) in centroids.column_mut(i).iter_mut().zip(m.column(j)) {
            *dst = x;
        }
    }
    let norms = m.column_norms_sq();
    let mut previous: Option<Partition> = None;
    let mut distortions = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let p = assign_nearest(m, &centroids, &norms).repair_empty_clusters(&mut rng)?;
        centroids = cluster_means(m, &p);
        distortions.push(distortion(m, &centroids, &p));
        let stable = previous.as_ref() == Some(&p);
        previous = Some(p);
        if stable {
            converged = true;
            break;
        }
    }
    let partition = previous.expect("at least one iteration runs when max_iter >= 1");
    Ok(KMeansOutput {
        partition,
        centroids,
        distortions,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct SphericalKMeansOutput {
    pub partition: Partition,
    pub centroids: CentroidSet,
    /// `sum_i sum_{j in pi_i} (m_j^T u_i) / ||m_j||` after every iteration.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Zero columns, placed in cluster 0 and ignored by the centroid updates.
    pub zero_columns: usize,
    /// Centroid updates where the direction sum vanished and the previous
    /// centroid was kept.
    pub zero_centroid_events: usize,
}

impl SphericalKMeansOutput {
    /// `U` = centroids, `V` = optimal coefficients `m_j^T u_i`.
    pub fn factorization(&self, m: &DataMatrix) -> Factorization {
        factorization_from(m, &self.centroids, &self.partition)
    }
}

/// Scales every nonzero column to unit norm; zero columns stay zero.
pub fn normalize_columns(m: &DataMatrix) -> DataMatrix {
    match m {
        DataMatrix::Dense(a) => {
            let mut out = a.clone();
            for mut col in out.columns_mut() {
                let norm = col.dot(&col).sqrt();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            DataMatrix::Dense(out)
        }
        DataMatrix::Sparse(s) => {
            let mut values = s.values().to_vec();
            let ptr = s.col_ptr();
            for j in 0..s.ncols() {
                let range = ptr[j]..ptr[j + 1];
                let norm = values[range.clone()].iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    values[range].iter_mut().for_each(|x| *x /= norm);
                }
            }
            let csc = CscMatrix::new(s.nrows(), s.ncols(), ptr.to_vec(), s.row_indices().to_vec(), values)
                .expect("structure is unchanged");
            DataMatrix::Sparse(csc)
        }
    }
}

/// Spherical k-means: cosine assignment, centroid `s / ||s||` with `s` the
/// sum of the normalized members.
pub fn spherical_kmeans(m: &DataMatrix, k: usize, opts: &BaselineOptions) -> Result<SphericalKMeansOutput> {
    let n = m.ncols();
    if k == 0 || n < k {
        return Err(OnmfError::Infeasible { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x = normalize_columns(m);
    let zero_columns = n - x.nonzero_columns().len();
    let mut centroids = random_column_centroids(&x, k, &mut rng).into_inner();
    let mut previous: Option<Partition> = None;
    let mut objectives = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut zero_centroid_events = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let p = crate::em_onmf::assign_clusters(&x, &CentroidSet::from_columns_unchecked(centroids.clone()))
            .repair_empty_clusters(&mut rng)?;
        for (i, members) in p.clusters().iter().enumerate() {
            let mut s = vec![0.0; x.nrows()];
            for &j in members {
                x.axpy_column(j, 1.0, &mut s);
            }
            let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                zero_centroid_events += 1;
                continue;
            }
            for (dst, v) in centroids.column_mut(i).iter_mut().zip(s) {
                *dst = v / norm;
            }
        }
        let cols: Vec<Vec<f64>> = (0..k).map(|i| centroids.column(i).to_vec()).collect();
        let objective: f64 = (0..n).map(|j| x.column_dot(j, &cols[p.cluster_of(j)])).sum();
        objectives.push(objective);
        let stable = previous.as_ref() == Some(&p);
        previous = Some(p);
        if stable {
            converged = true;
            break;
        }
    }
    let partition = previous.expect("at least one iteration runs when max_iter >= 1");
    Ok(SphericalKMeansOutput {
        partition,
        centroids: CentroidSet::from_columns_unchecked(centroids),
        objectives,
        iterations,
        converged,
        zero_columns,
        zero_centroid_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense(a: Array2<f64>) -> DataMatrix {
        DataMatrix::dense(a).unwrap()
    }

    #[test]
    fn separated_groups() {
        let m = dense(array![[0.0, 0.1, 0.2, 10.0, 10.1, 9.9], [0.0, 0.2, 0.1, 10.0, 9.8, 10.2]]);
        let out = kmeans(&m, 2, &BaselineOptions { seed: 5, ..Default::default() }).unwrap();
        let a = out.partition.assignment();
        assert!(a[..3].iter().all(|&c| c == a[0]));
        assert!(a[3..].iter().all(|&c| c == a[3]));
        assert_ne!(a[0], a[3]);
        assert!(out.converged);
    }

    #[test]
    fn identical_points_have_zero_distortion() {
        let m = dense(array![[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]);
        let out = kmeans(&m, 2, &BaselineOptions::default()).unwrap();
        assert!(out.partition.all_nonempty());
        assert!(out.distortions.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn one_ray_gives_its_direction() {
        let m = dense(array![[3.0, 6.0, 0.3], [4.0, 8.0, 0.4]]);
        let out = spherical_kmeans(&m, 1, &BaselineOptions::default()).unwrap();
        let c = out.centroids.column(0);
        assert!((c[0] - 0.6).abs() < 1e-12 && (c[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_columns_are_counted() {
        let m = dense(array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let out = spherical_kmeans(&m, 2, &BaselineOptions::default()).unwrap();
        assert_eq!(out.zero_columns, 1);
        assert_eq!(out.partition.cluster_of(1), 0);
    }

    #[test]
    fn infeasible() {
        let m = dense(array![[1.0]]);
        assert!(kmeans(&m, 2, &BaselineOptions::default()).is_err());
        assert!(spherical_kmeans(&m, 2, &BaselineOptions::default()).is_err());
    }
}
