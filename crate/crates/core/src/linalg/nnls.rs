//! Nonnegative least squares for the `U` subproblem, `min_{U >= 0} ||M - U V||_F^2`.
//!
//! The problem separates over the rows of `U`. Every row shares the Gram
//! matrix `G = V V^T`, so each is solved in normal-equation form
//! `min_{x >= 0} 1/2 x^T G x - b^T x` with `b = V m_r`, using the
//! Lawson-Hanson active-set iteration.

use ndarray::{Array2, ArrayView2};

use super::matrix::DataMatrix;
use crate::error::{OnmfError, Result};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    /// `m x k`, entrywise nonnegative.
    pub u: Array2<f64>,
    /// Set when `V V^T` was numerically singular on some passive set and the
    /// coordinate-descent fallback produced the row.
    pub degenerate: bool,
}

pub fn nnls_solve(m: &DataMatrix, v: ArrayView2<f64>) -> Result<NnlsSolution> {
    if v.ncols() != m.ncols() {
        return Err(OnmfError::DimensionMismatch(format!(
            "V has {} columns, M has {}",
            v.ncols(),
            m.ncols()
        )));
    }
    let g = v.dot(&v.t());
    let b = m.mul_transposed(v);
    Ok(nnls_gram_rows(&g, b.view()))
}

/// Solves every row of `rhs` (shape `m x k`) against the shared Gram matrix.
pub fn nnls_gram_rows(g: &Array2<f64>, rhs: ArrayView2<f64>) -> NnlsSolution {
    let (rows, k) = rhs.dim();
    let mut u = Array2::zeros((rows, k));
    let mut degenerate = false;
    let mut b = vec![0.0; k];
    for r in 0..rows {
        for (dst, &src) in b.iter_mut().zip(rhs.row(r)) {
            *dst = src;
        }
        let (x, deg) = nnls_gram(g, &b);
        degenerate |= deg;
        for (dst, src) in u.row_mut(r).iter_mut().zip(x) {
            *dst = src;
        }
    }
    NnlsSolution { u, degenerate }
}

/// Lawson-Hanson on `min_{x >= 0} 1/2 x^T G x - b^T x`. Returns the solution
/// and whether the fallback had to be used.
pub fn nnls_gram(g: &Array2<f64>, b: &[f64]) -> (Vec<f64>, bool) {
    let k = b.len();
    let scale = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let mut x = vec![0.0; k];
    let mut passive = vec![false; k];
    let mut outer = 0;
    loop {
        let w = neg_gradient(g, b, &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        outer += 1;
        if outer > 3 * k + 10 {
            break;
        }
        passive[t] = true;
        loop {
            let set: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let Some(z) = solve_passive(g, b, &set) else {
                return (coordinate_descent(g, b, x), true);
            };
            if z.iter().all(|&zj| zj > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&j, &zj) in set.iter().zip(&z) {
                    x[j] = zj;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&j, &zj) in set.iter().zip(&z) {
                if zj <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - zj));
                }
            }
            for (&j, &zj) in set.iter().zip(&z) {
                x[j] += alpha * (zj - x[j]);
            }
            for &j in &set {
                if x[j] <= tol * 1e-3 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    (x, false)
}

fn neg_gradient(g: &Array2<f64>, b: &[f64], x: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|i| b[i] - g.row(i).iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

/// Solves `G[set, set] z = b[set]` by Cholesky; `None` if not positive definite.
fn solve_passive(g: &Array2<f64>, b: &[f64], set: &[usize]) -> Option<Vec<f64>> {
    let p = set.len();
    let max_diag = set.iter().map(|&i| g[[i, i]]).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = g[[set[i], set[j]]];
            for q in 0..j {
                sum -= l[i * p + q] * l[j * p + q];
            }
            if i == j {
                if sum <= 1e-13 * max_diag {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut sum = b[set[i]];
        for q in 0..i {
            sum -= l[i * p + q] * y[q];
        }
        y[i] = sum / l[i * p + i];
    }
    let mut z = vec![0.0; p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for q in (i + 1)..p {
            sum -= l[q * p + i] * z[q];
        }
        z[i] = sum / l[i * p + i];
    }
    Some(z)
}

/// Projected Gauss-Seidel; converges to a KKT point for any PSD `G`.
fn coordinate_descent(g: &Array2<f64>, b: &[f64], mut x: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for _ in 0..100_000 {
        let mut max_step = 0.0f64;
        for j in 0..k {
            let gjj = g[[j, j]];
            if gjj <= 0.0 {
                x[j] = 0.0;
                continue;
            }
            let grad: f64 = g.row(j).iter().zip(&x).map(|(a, c)| a * c).sum::<f64>() - b[j];
            let next = (x[j] - grad / gjj).max(0.0);
            max_step = max_step.max((next - x[j]).abs());
            x[j] = next;
        }
        if kkt_residual(g, b, &x) <= 1e-12 * b.iter().fold(1.0f64, |a, v| a.max(v.abs())) || max_step == 0.0 {
            break;
        }
    }
    x
}

/// Largest violation of the KKT conditions of `min_{x>=0} 1/2 x^T G x - b^T x`:
/// `|grad_j|` where `x_j > 0`, `max(0, -grad_j)` where `x_j = 0`, and any
/// negative `x_j`.
pub fn kkt_residual(g: &Array2<f64>, b: &[f64], x: &[f64]) -> f64 {
    let w = neg_gradient(g, b, x);
    let mut worst = 0.0f64;
    for (j, &xj) in x.iter().enumerate() {
        let grad = -w[j];
        let viol = if xj > 0.0 { grad.abs() } else { (-grad).max(0.0) };
        worst = worst.max(viol).max((-xj).max(0.0));
    }
    worst
}
