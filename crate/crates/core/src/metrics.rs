//! Evaluation quantities: clustering accuracy, reconstruction error and the
//! two constraint residuals of `V`.

use ndarray::{Array2, ArrayView2};

use crate::error::{OnmfError, Result};
use crate::linalg::{gram_residual, DataMatrix};
use crate::partition::Partition;

/// A data matrix together with the true class of every column.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub matrix: DataMatrix,
    /// Zero-based class index per column.
    pub labels: Vec<usize>,
    /// Original label tokens, indexed by class.
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(matrix: DataMatrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != matrix.ncols() {
            return Err(OnmfError::DimensionMismatch(format!(
                "{} labels for {} columns",
                labels.len(),
                matrix.ncols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(OnmfError::DimensionMismatch(format!(
                "label {bad} outside the {} known classes",
                class_names.len()
            )));
        }
        Ok(Self {
            matrix,
            labels,
            class_names,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// `counts[cluster][class]`
pub fn confusion_matrix(p: &Partition, labels: &[usize]) -> Vec<Vec<usize>> {
    let classes = labels.iter().copied().max().map_or(0, |c| c + 1);
    let mut counts = vec![vec![0usize; classes]; p.k()];
    for (j, &l) in labels.iter().enumerate() {
        counts[p.cluster_of(j)][l] += 1;
    }
    counts
}

/// Fraction of points on the diagonal of the confusion matrix under the best
/// cluster-to-class matching. Unequal cluster and class counts are handled
/// by zero padding.
pub fn accuracy(p: &Partition, labels: &[usize]) -> Result<f64> {
    if p.n() != labels.len() {
        return Err(OnmfError::DimensionMismatch(format!(
            "partition has {} points, labels have {}",
            p.n(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let matched = best_matching_total(&confusion_matrix(p, labels));
    Ok(matched as f64 / labels.len() as f64)
}

/// Maximum of `sum_i counts[i][perm(i)]` over all matchings.
pub fn best_matching_total(counts: &[Vec<usize>]) -> usize {
    let rows = counts.len();
    let cols = counts.iter().map(Vec::len).max().unwrap_or(0);
    let size = rows.max(cols);
    if size == 0 {
        return 0;
    }
    let mut cost = vec![vec![0i64; size]; size];
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            cost[i][j] = -(c as i64);
        }
    }
    let assignment = hungarian(&cost);
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| counts.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0))
        .sum()
}

/// Minimum-cost perfect matching on a square matrix; returns the column
/// assigned to each row. Shortest augmenting paths with row/column
/// potentials, `O(n^3)`.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    // 1-based internally; index 0 is the virtual source.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            result[owner[j] - 1] = j - 1;
        }
    }
    result
}

/// `||V V^T - I_k||_F`
pub fn orthogonality_residual(v: ArrayView2<f64>) -> f64 {
    gram_residual(v)
}

/// Orthogonality residual of `V` after scaling every nonzero row to unit norm.
pub fn normalized_orthogonality_residual(v: ArrayView2<f64>) -> f64 {
    let mut w = v.to_owned();
    for mut row in w.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    gram_residual(w.view())
}

/// `||min(V, 0)||_F / ||V||_F`, zero for `V = 0`.
pub fn negativity_residual(v: ArrayView2<f64>) -> f64 {
    let (mut neg, mut all) = (0.0, 0.0);
    for &x in v.iter() {
        all += x * x;
        if x < 0.0 {
            neg += x * x;
        }
    }
    if all == 0.0 {
        0.0
    } else {
        (neg / all).sqrt()
    }
}

/// `||M - U V||_F`. Dense inputs are evaluated entrywise; sparse inputs use
/// `||M||^2 - 2 <U^T M, V> + <U^T U, V V^T>` to avoid densifying `M`.
pub fn reconstruction_error(m: &DataMatrix, u: ArrayView2<f64>, v: ArrayView2<f64>) -> f64 {
    match m {
        DataMatrix::Dense(a) => {
            let r: Array2<f64> = a - &u.dot(&v);
            r.iter().map(|x| x * x).sum::<f64>().sqrt()
        }
        DataMatrix::Sparse(_) => {
            let utm = m.left_mul_transposed(u);
            let cross = (&utm * &v).sum();
            let quad = (&u.t().dot(&u) * &v.dot(&v.t())).sum();
            (m.frobenius_sq() - 2.0 * cross + quad).max(0.0).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn part(a: &[usize], k: usize) -> Partition {
        Partition::new(a.to_vec(), k).unwrap()
    }

    #[test]
    fn identical_partition_scores_one() {
        let labels = [0, 0, 1, 2, 2, 1];
        assert_eq!(accuracy(&part(&labels, 3), &labels).unwrap(), 1.0);
    }

    #[test]
    fn relabeled_partition_scores_one() {
        let labels = [0, 0, 1, 2, 2, 1];
        let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 2) % 3).collect();
        assert_eq!(accuracy(&part(&relabeled, 3), &labels).unwrap(), 1.0);
    }

    #[test]
    fn worked_confusion_example() {
        assert_eq!(best_matching_total(&[vec![3, 1], vec![2, 4]]), 7);
        // realize the confusion matrix as a partition over 10 points
        let mut clusters = Vec::new();
        let mut labels = Vec::new();
        for (c, row) in [[3usize, 1], [2, 4]].iter().enumerate() {
            for (l, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    clusters.push(c);
                    labels.push(l);
                }
            }
        }
        assert!((accuracy(&part(&clusters, 2), &labels).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn fewer_clusters_than_classes_is_padded() {
        let labels = [0, 1, 2, 2];
        let acc = accuracy(&part(&[0, 0, 1, 1], 2), &labels).unwrap();
        assert!((acc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_examples() {
        assert_eq!(orthogonality_residual(Array2::<f64>::eye(3).view()), 0.0);
        let dup = array![[0.6, 0.8], [0.6, 0.8]];
        assert!((orthogonality_residual(dup.view()) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn negativity_examples() {
        assert_eq!(negativity_residual(array![[1.0, 0.0], [0.0, 2.0]].view()), 0.0);
        let v = array![[-1.0, 0.0], [0.0, 1.0]];
        assert!((negativity_residual(v.view()) - 0.5f64.sqrt()).abs() < 1e-15);
        let scaled = &v * 3.7;
        assert!((negativity_residual(scaled.view()) - negativity_residual(v.view())).abs() < 1e-15);
        assert_eq!(negativity_residual(Array2::zeros((2, 2)).view()), 0.0);
    }

    #[test]
    fn reconstruction_examples() {
        let u = array![[1.0, 0.0], [2.0, 1.0]];
        let v = array![[1.0, 0.5, 0.0], [0.0, 1.0, 3.0]];
        let m = DataMatrix::dense(u.dot(&v)).unwrap();
        assert!(reconstruction_error(&m, u.view(), v.view()) < 1e-15);
        let zero = Array2::zeros((2, 2));
        assert!((reconstruction_error(&m, zero.view(), v.view()) - m.frobenius_sq().sqrt()).abs() < 1e-14);
        let sparse = DataMatrix::Sparse(m.to_sparse());
        assert!((reconstruction_error(&sparse, zero.view(), v.view()) - m.frobenius_sq().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn label_count_mismatch() {
        let m = DataMatrix::dense(Array2::zeros((1, 2))).unwrap();
        assert!(LabeledDataset::new(m, vec![0], vec!["a".into()]).is_err());
    }
}
