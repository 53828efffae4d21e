//! Nonnegative data matrices in dense or compressed-sparse-column form.
//!
//! Columns are data points throughout the crate. Every kernel that consumes
//! a [`DataMatrix`] goes through the handful of products defined here, so the
//! dense and sparse paths share all of the algorithmic code.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{OnmfError, Result};

/// Compressed-sparse-column storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Validates the structure: `col_ptr` has `ncols + 1` monotone entries
    /// ending at `nnz`, row indices are strictly increasing within a column.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(OnmfError::InvalidSparse(format!(
                "column pointer length {} != ncols + 1 = {}",
                col_ptr.len(),
                ncols + 1
            )));
        }
        if row_idx.len() != values.len() {
            return Err(OnmfError::InvalidSparse(
                "row index and value arrays differ in length".into(),
            ));
        }
        if col_ptr[0] != 0 || col_ptr[ncols] != values.len() {
            return Err(OnmfError::InvalidSparse(
                "column pointers must start at 0 and end at nnz".into(),
            ));
        }
        for j in 0..ncols {
            let (lo, hi) = (col_ptr[j], col_ptr[j + 1]);
            if hi < lo {
                return Err(OnmfError::InvalidSparse(format!(
                    "column pointers decrease at column {j}"
                )));
            }
            for p in lo..hi {
                if row_idx[p] >= nrows {
                    return Err(OnmfError::InvalidSparse(format!(
                        "row index {} out of range in column {j}",
                        row_idx[p]
                    )));
                }
                if p > lo && row_idx[p] <= row_idx[p - 1] {
                    return Err(OnmfError::InvalidSparse(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= nrows || j >= ncols {
                return Err(OnmfError::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (j, i));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
            last = Some((i, j));
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let csc = Self::new(nrows, ncols, col_ptr, row_idx, values)?;
        Ok(csc.without_explicit_zeros())
    }

    fn without_explicit_zeros(self) -> Self {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                if self.values[p] != 0.0 {
                    row_idx.push(self.row_idx[p]);
                    values.push(self.values[p]);
                }
            }
            col_ptr[j + 1] = values.len();
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn from_dense(a: ArrayView2<f64>) -> Self {
        let (m, n) = a.dim();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            for i in 0..m {
                let v = a[[i, j]];
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(values.len());
        }
        Self {
            nrows: m,
            ncols: n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row indices, values)` of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let p = next[i];
                row_idx[p] = j;
                values[p] = v;
                next[i] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
        }
    }
}

/// A nonnegative `m x n` matrix whose columns are the data points.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMatrix {
    Dense(Array2<f64>),
    Sparse(CscMatrix),
}

fn check_entry(row: usize, col: usize, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(OnmfError::NonFinite { row, col });
    }
    if v < 0.0 {
        return Err(OnmfError::NegativeValue {
            row,
            col,
            value: v,
        });
    }
    Ok(())
}

impl DataMatrix {
    /// Wraps a dense matrix after checking every entry is finite and `>= 0`.
    pub fn dense(a: Array2<f64>) -> Result<Self> {
        for ((i, j), &v) in a.indexed_iter() {
            check_entry(i, j, v)?;
        }
        Ok(DataMatrix::Dense(a))
    }

    /// Wraps a sparse matrix after checking every stored value is finite and `>= 0`.
    pub fn sparse(a: CscMatrix) -> Result<Self> {
        for j in 0..a.ncols() {
            let (rows, vals) = a.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                check_entry(i, j, v)?;
            }
        }
        Ok(DataMatrix::Sparse(a))
    }

    pub fn nrows(&self) -> usize {
        match self {
            DataMatrix::Dense(a) => a.nrows(),
            DataMatrix::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            DataMatrix::Dense(a) => a.ncols(),
            DataMatrix::Sparse(s) => s.ncols(),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    /// Number of structurally nonzero entries.
    pub fn nnz(&self) -> usize {
        match self {
            DataMatrix::Dense(a) => a.iter().filter(|&&v| v != 0.0).count(),
            DataMatrix::Sparse(s) => s.nnz(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, DataMatrix::Sparse(_))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            DataMatrix::Dense(a) => a.clone(),
            DataMatrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CscMatrix {
        match self {
            DataMatrix::Dense(a) => CscMatrix::from_dense(a.view()),
            DataMatrix::Sparse(s) => s.clone(),
        }
    }

    pub fn transpose(&self) -> DataMatrix {
        match self {
            DataMatrix::Dense(a) => DataMatrix::Dense(a.t().to_owned()),
            DataMatrix::Sparse(s) => DataMatrix::Sparse(s.transpose()),
        }
    }

    /// `||M||_F^2`
    pub fn frobenius_sq(&self) -> f64 {
        match self {
            DataMatrix::Dense(a) => a.iter().map(|v| v * v).sum(),
            DataMatrix::Sparse(s) => s.values().iter().map(|v| v * v).sum(),
        }
    }

    /// Dense copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        match self {
            DataMatrix::Dense(a) => a.column(j).to_vec(),
            DataMatrix::Sparse(s) => {
                let mut out = vec![0.0; s.nrows()];
                let (rows, vals) = s.column(j);
                for (&i, &v) in rows.iter().zip(vals) {
                    out[i] = v;
                }
                out
            }
        }
    }

    /// `m_j^T u`
    pub fn column_dot(&self, j: usize, u: &[f64]) -> f64 {
        match self {
            DataMatrix::Dense(a) => a.column(j).iter().zip(u).map(|(x, y)| x * y).sum(),
            DataMatrix::Sparse(s) => {
                let (rows, vals) = s.column(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * u[i]).sum()
            }
        }
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        match self {
            DataMatrix::Dense(a) => a.column(j).iter().map(|v| v * v).sum(),
            DataMatrix::Sparse(s) => s.column(j).1.iter().map(|v| v * v).sum(),
        }
    }

    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.column_norm_sq(j)).collect()
    }

    /// `y <- y + alpha * m_j`
    pub fn axpy_column(&self, j: usize, alpha: f64, y: &mut [f64]) {
        match self {
            DataMatrix::Dense(a) => {
                for (yi, &v) in y.iter_mut().zip(a.column(j)) {
                    *yi += alpha * v;
                }
            }
            DataMatrix::Sparse(s) => {
                let (rows, vals) = s.column(j);
                for (&i, &v) in rows.iter().zip(vals) {
                    y[i] += alpha * v;
                }
            }
        }
    }

    /// `M x` for `x` of length `n`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                self.axpy_column(j, xj, &mut y);
            }
        }
        y
    }

    /// `M^T y` for `y` of length `m`.
    pub fn tmatvec(&self, y: &[f64]) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.column_dot(j, y)).collect()
    }

    /// `M X` for `X` of shape `n x k`.
    pub fn mul_dense(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.ncols(), "inner dimensions differ");
        match self {
            DataMatrix::Dense(a) => a.dot(&x),
            DataMatrix::Sparse(s) => {
                let mut out = Array2::zeros((s.nrows(), x.ncols()));
                for j in 0..s.ncols() {
                    let xrow = x.row(j);
                    let (rows, vals) = s.column(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        let mut orow = out.row_mut(i);
                        orow.scaled_add(v, &xrow);
                    }
                }
                out
            }
        }
    }

    /// `M^T Y` for `Y` of shape `m x k`.
    pub fn tmul_dense(&self, y: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(y.nrows(), self.nrows(), "inner dimensions differ");
        match self {
            DataMatrix::Dense(a) => a.t().dot(&y),
            DataMatrix::Sparse(s) => {
                let k = y.ncols();
                let mut out = Array2::zeros((s.ncols(), k));
                for j in 0..s.ncols() {
                    let (rows, vals) = s.column(j);
                    let mut orow = out.row_mut(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        orow.scaled_add(v, &y.row(i));
                    }
                }
                out
            }
        }
    }

    /// `M V^T` for `V` of shape `k x n`; the right-hand sides of the NNLS
    /// problem for `U`.
    pub fn mul_transposed(&self, v: ArrayView2<f64>) -> Array2<f64> {
        self.mul_dense(v.t())
    }

    /// `U^T M` for `U` of shape `m x k`.
    pub fn left_mul_transposed(&self, u: ArrayView2<f64>) -> Array2<f64> {
        self.tmul_dense(u).reversed_axes()
    }

    /// The submatrix `M(:, cols)`, keeping the storage kind.
    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        match self {
            DataMatrix::Dense(a) => DataMatrix::Dense(a.select(Axis(1), cols)),
            DataMatrix::Sparse(s) => {
                let mut col_ptr = Vec::with_capacity(cols.len() + 1);
                let mut row_idx = Vec::new();
                let mut values = Vec::new();
                col_ptr.push(0);
                for &j in cols {
                    let (rows, vals) = s.column(j);
                    row_idx.extend_from_slice(rows);
                    values.extend_from_slice(vals);
                    col_ptr.push(values.len());
                }
                DataMatrix::Sparse(CscMatrix {
                    nrows: s.nrows(),
                    ncols: cols.len(),
                    col_ptr,
                    row_idx,
                    values,
                })
            }
        }
    }

    /// Indices of columns with at least one nonzero entry.
    pub fn nonzero_columns(&self) -> Vec<usize> {
        (0..self.ncols())
            .filter(|&j| self.column_norm_sq(j) > 0.0)
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
