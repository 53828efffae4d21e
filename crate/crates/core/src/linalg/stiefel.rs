//! Nearest matrix with orthonormal rows (polar factor).

use ndarray::{Array1, Array2, ArrayView2};

use super::svd::symmetric_eigen;
use crate::error::{OnmfError, Result};

/// Absolute floor on the smallest singular value below which the projection
/// is reported as non-unique.
pub const RANK_TOL: f64 = 1e-12;

/// Relative floor `sigma_min / sigma_max`. The Gram route squares the
/// condition number, so below this ratio the computed polar factor is no
/// longer trustworthy.
pub const GRAM_RELATIVE_FLOOR: f64 = 1e-7;

/// A `k x n` matrix `X` with `X X^T = I_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalRows(Array2<f64>);

impl OrthonormalRows {
    /// Wraps `x` if `||X X^T - I||_F <= tol`.
    pub fn try_new(x: Array2<f64>, tol: f64) -> Option<Self> {
        (gram_residual(x.view()) <= tol).then_some(Self(x))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn n(&self) -> usize {
        self.0.ncols()
    }
}

/// `||X X^T - I_k||_F`
pub fn gram_residual(x: ArrayView2<f64>) -> f64 {
    let g = x.dot(&x.t());
    let k = g.nrows();
    let mut acc = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (g[[i, j]] - target).powi(2);
        }
    }
    acc.sqrt()
}

/// `argmin_{X X^T = I} ||Vhat - X||_F = P Q^T` for the thin SVD
/// `Vhat = P S Q^T`, computed as `(Vhat Vhat^T)^{-1/2} Vhat` followed by one
/// refinement pass of the same map.
pub fn project_stiefel(vhat: ArrayView2<f64>) -> Result<OrthonormalRows> {
    let (k, n) = vhat.dim();
    if k > n {
        return Err(OnmfError::DimensionMismatch(format!(
            "cannot orthonormalize {k} rows of length {n}"
        )));
    }
    let (x, sigma_min, sigma_max) = inverse_sqrt_gram_apply(vhat)?;
    if sigma_min < RANK_TOL || sigma_min < GRAM_RELATIVE_FLOOR * sigma_max {
        return Err(OnmfError::RankDeficient { sigma_min });
    }
    let (x, _, _) = inverse_sqrt_gram_apply(x.view())?;
    Ok(OrthonormalRows(x))
}

fn inverse_sqrt_gram_apply(a: ArrayView2<f64>) -> Result<(Array2<f64>, f64, f64)> {
    let g = a.dot(&a.t());
    let g = (&g + &g.t()) * 0.5;
    let (lambda, p) = symmetric_eigen(&g);
    let sigma_max = lambda[0].max(0.0).sqrt();
    let sigma_min = lambda[lambda.len() - 1].max(0.0).sqrt();
    if sigma_min == 0.0 {
        return Err(OnmfError::RankDeficient { sigma_min });
    }
    let inv = Array1::from_iter(lambda.iter().map(|l| 1.0 / l.sqrt()));
    // P diag(inv) P^T A
    let pt_a = p.t().dot(&a);
    let scaled = &pt_a * &inv.insert_axis(ndarray::Axis(1));
    Ok((p.dot(&scaled), sigma_min, sigma_max))
}
