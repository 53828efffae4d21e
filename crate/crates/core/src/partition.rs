use ndarray::Array2;
use rand::Rng;

use crate::error::{OnmfError, Result};

/// Assignment of `n` columns to `k` clusters. Cluster ids are zero-based in
/// memory and one-based in every file the crate writes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((j, &c)) = assignment.iter().enumerate().find(|(_, &c)| c >= k) {
            return Err(OnmfError::DimensionMismatch(format!(
                "column {j} assigned to cluster {c} but k = {k}"
            )));
        }
        Ok(Self { assignment, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, j: usize) -> usize {
        self.assignment[j]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// Column indices of every cluster, in increasing order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (j, &c) in self.assignment.iter().enumerate() {
            out[c].push(j);
        }
        out
    }

    pub fn all_nonempty(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }

    /// Moves a point into every empty cluster. The donor is drawn uniformly
    /// from the largest cluster that has at least two members (lowest index
    /// on size ties).
    pub fn repair_empty_clusters<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<Self> {
        if self.n() < self.k {
            return Err(OnmfError::Infeasible {
                n: self.n(),
                k: self.k,
            });
        }
        loop {
            let sizes = self.sizes();
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                return Ok(self);
            };
            let mut donor = None;
            for (c, &s) in sizes.iter().enumerate() {
                if s >= 2 && donor.is_none_or(|d: usize| s > sizes[d]) {
                    donor = Some(c);
                }
            }
            let donor = donor.expect("n >= k leaves a cluster with two members");
            let members: Vec<usize> = (0..self.n()).filter(|&j| self.assignment[j] == donor).collect();
            let pick = members[rng.random_range(0..members.len())];
            self.assignment[pick] = empty;
        }
    }

    /// Writes `(column, cluster)` pairs, both one-based.
    pub fn one_based_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment.iter().enumerate().map(|(j, &c)| (j + 1, c + 1))
    }
}

/// `k` nonnegative unit vectors of length `m`, stored as the columns of an
/// `m x k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet(Array2<f64>);

impl CentroidSet {
    pub fn new(columns: Array2<f64>) -> Result<Self> {
        for (i, col) in columns.columns().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(OnmfError::InvalidConfig(format!(
                    "centroid {i} has norm {norm}, expected 1"
                )));
            }
            if col.iter().any(|&x| x < 0.0) {
                return Err(OnmfError::InvalidConfig(format!(
                    "centroid {i} has a negative entry"
                )));
            }
        }
        Ok(Self(columns))
    }

    pub(crate) fn from_columns_unchecked(columns: Array2<f64>) -> Self {
        Self(columns)
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    pub fn m(&self) -> usize {
        self.0.nrows()
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.0.column(i).to_vec()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// `M ~ U V` with the objective `||M - U V||_F^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    /// `m x k`
    pub u: Array2<f64>,
    /// `k x n`
    pub v: Array2<f64>,
    pub objective: f64,
}

/// Column `j` goes to `argmax_i v_ij`, lowest index on ties.
pub fn partition_from_rows(v: &Array2<f64>) -> Partition {
    let (k, n) = v.dim();
    let assignment = (0..n)
        .map(|j| {
            let mut best = 0;
            for i in 1..k {
                if v[[i, j]] > v[[best, j]] {
                    best = i;
                }
            }
            best
        })
        .collect();
    Partition { assignment, k }
}
