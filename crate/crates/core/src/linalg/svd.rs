//! Dominant singular directions without a full SVD.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{norm2, DataMatrix};
use crate::error::{OnmfError, Result};

/// Default relative residual tolerance of the power iteration.
pub const POWER_TOL: f64 = 1e-10;

/// Sweep cap for subspace iteration.
pub const SUBSPACE_MAX_SWEEPS: usize = 5000;

/// Residual tolerance of subspace iteration, relative to the largest Ritz value.
pub const SUBSPACE_TOL: f64 = 1e-11;

/// Iteration cap for the power iteration: `10 * max(m, n, 100)`.
pub fn default_power_iterations(m: usize, n: usize) -> usize {
    10 * m.max(n).max(100)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    /// Unit vector of length `m`.
    pub left: Vec<f64>,
    /// Unit vector of length `n`.
    pub right: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit; the fields then hold the last iterate.
    pub converged: bool,
}

/// Power iteration on `A^T A` from the normalized all-ones vector.
///
/// On return `A^T u = sigma v` holds exactly (up to rounding) and the loop
/// stops once `||A v - sigma u|| <= tol * sigma`. For a nonnegative `A` all
/// iterates stay nonnegative.
pub fn dominant_singular_triplet(a: &DataMatrix, tol: f64, max_iter: usize) -> Result<SingularTriplet> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 || a.frobenius_sq() == 0.0 {
        return Err(OnmfError::ZeroMatrix);
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut u = a.matvec(&v);
    if norm2(&u) == 0.0 {
        // Only reachable for signed input: fall back to the heaviest column.
        let norms = a.column_norms_sq();
        let j = argmax(&norms);
        v = vec![0.0; n];
        v[j] = 1.0;
        u = a.matvec(&v);
    }
    let mut sigma = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let inv = 1.0 / norm2(&u);
        scale(&mut u, inv);
        let w = a.tmatvec(&u);
        sigma = norm2(&w);
        if sigma == 0.0 {
            return Err(OnmfError::ZeroMatrix);
        }
        v = w;
        scale(&mut v, 1.0 / sigma);
        let next = a.matvec(&v);
        let resid: f64 = next
            .iter()
            .zip(&u)
            .map(|(x, y)| (x - sigma * y).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= tol * sigma {
            converged = true;
            break;
        }
        u = next;
    }
    if !converged {
        // u = A v here; normalize so that (sigma, u, v) satisfy A v = sigma u.
        sigma = norm2(&u);
        let inv = 1.0 / sigma;
        scale(&mut u, inv);
    }
    Ok(SingularTriplet {
        sigma,
        left: u,
        right: v,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonnegDirection {
    /// Nonnegative unit vector of length `m`.
    pub vector: Vec<f64>,
    /// `||A^T u||_2`, equal to `sigma_1(A)` on convergence.
    pub sigma: f64,
    pub converged: bool,
}

/// Nonnegative dominant left singular vector of a nonnegative matrix.
pub fn nonneg_dominant_left_vector(a: &DataMatrix) -> Result<NonnegDirection> {
    let (m, n) = a.dim();
    let triplet = dominant_singular_triplet(a, POWER_TOL, default_power_iterations(m, n))?;
    let mut u = triplet.left;
    if u.iter().sum::<f64>() < 0.0 {
        scale(&mut u, -1.0);
    }
    debug_assert!(u.iter().all(|&x| x >= -1e-12), "dominant vector has a negative entry");
    for x in u.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let norm = norm2(&u);
    scale(&mut u, 1.0 / norm);
    let sigma = norm2(&a.tmatvec(&u));
    Ok(NonnegDirection {
        vector: u,
        sigma,
        converged: triplet.converged,
    })
}

#[derive(Debug, Clone)]
pub struct RightSingularBasis {
    /// `k x n`, rows orthonormal, ordered by decreasing singular value.
    pub vectors: Array2<f64>,
    pub singular_values: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Leading `k` right singular vectors by subspace iteration on `M^T M`
/// with a Rayleigh-Ritz step every sweep.
pub fn top_k_right_singular_vectors(m: &DataMatrix, k: usize) -> Result<RightSingularBasis> {
    top_k_right_singular_vectors_with(m, k, SUBSPACE_TOL, SUBSPACE_MAX_SWEEPS)
}

pub fn top_k_right_singular_vectors_with(
    m: &DataMatrix,
    k: usize,
    tol: f64,
    max_sweeps: usize,
) -> Result<RightSingularBasis> {
    let (rows, n) = m.dim();
    if k == 0 || k > rows.min(n) {
        return Err(OnmfError::DimensionMismatch(format!(
            "k = {k} must lie in 1..={}",
            rows.min(n)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a11_5eed);
    let start = Array2::from_shape_fn((n, k), |_| rng.random::<f64>() - 0.5);
    let mut x = orthonormalize_columns(start.view(), None);

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let y = m.tmul_dense(m.mul_dense(x.view()).view());
        let h = x.t().dot(&y);
        let h = symmetrize(&h);
        let (theta, w) = symmetric_eigen(&h);
        let x_ritz = x.dot(&w);
        let y_ritz = y.dot(&w);
        let top = theta[0].max(0.0);
        let converged = top == 0.0
            || (0..k).all(|i| {
                let r = &y_ritz.column(i) - &(&x_ritz.column(i) * theta[i]);
                r.dot(&r).sqrt() <= tol * top
            });
        if converged || sweeps >= max_sweeps {
            let singular_values = theta.iter().map(|t| t.max(0.0).sqrt()).collect();
            return Ok(RightSingularBasis {
                vectors: x_ritz.reversed_axes(),
                singular_values,
                sweeps,
                converged,
            });
        }
        x = orthonormalize_columns(y_ritz.view(), Some(x_ritz.view()));
    }
}

/// Modified Gram-Schmidt with reorthogonalization. Columns that collapse
/// (rank loss) are replaced by the matching `fallback` column, then by
/// canonical basis vectors, so the result always has `k` orthonormal columns.
pub(crate) fn orthonormalize_columns(a: ArrayView2<f64>, fallback: Option<ArrayView2<f64>>) -> Array2<f64> {
    let (n, k) = a.dim();
    let scale = a
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max);
    let mut q = Array2::<f64>::zeros((n, k));
    let mut next_basis = 0usize;
    for i in 0..k {
        let mut candidates: Vec<Array1<f64>> = vec![a.column(i).to_owned()];
        if let Some(fb) = fallback {
            candidates.push(fb.column(i).to_owned());
        }
        let mut placed = false;
        for (c, cand) in candidates.into_iter().enumerate() {
            let reference = if c == 0 { scale } else { 1.0 };
            if let Some(col) = orthogonalize_against(cand, &q, i, reference) {
                q.column_mut(i).assign(&col);
                placed = true;
                break;
            }
        }
        while !placed {
            let mut e = Array1::zeros(n);
            e[next_basis % n] = 1.0;
            next_basis += 1;
            if let Some(col) = orthogonalize_against(e, &q, i, 1.0) {
                q.column_mut(i).assign(&col);
                placed = true;
            }
        }
    }
    q
}

fn orthogonalize_against(mut v: Array1<f64>, q: &Array2<f64>, count: usize, reference: f64) -> Option<Array1<f64>> {
    if reference == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for j in 0..count {
            let qj = q.column(j);
            let c = qj.dot(&v);
            v.scaled_add(-c, &qj);
        }
    }
    let norm = v.dot(&v).sqrt();
    if norm <= 1e-10 * reference {
        return None;
    }
    v /= norm;
    Some(v)
}

fn symmetrize(h: &Array2<f64>) -> Array2<f64> {
    (h + &h.t()) * 0.5
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
/// Eigenvalues are returned in decreasing order with eigenvectors as the
/// matching columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= 1e-16 * total.sqrt() || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (arp, arq) = (a[[r, p]], a[[r, q]]);
                    a[[r, p]] = c * arp - s * arq;
                    a[[r, q]] = s * arp + c * arq;
                }
                for r in 0..n {
                    let (apr, aqr) = (a[[p, r]], a[[q, r]]);
                    a[[p, r]] = c * apr - s * aqr;
                    a[[q, r]] = s * apr + c * aqr;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for r in 0..n {
                    let (vrp, vrq) = (v[[r, p]], v[[r, q]]);
                    v[[r, p]] = c * vrp - s * vrq;
                    v[[r, q]] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    (values, vectors)
}

fn scale(x: &mut [f64], alpha: f64) {
    for v in x {
        *v *= alpha;
    }
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// `||A^T u||_2` for a unit `u`; the value a centroid direction achieves.
pub fn captured_norm(a: &DataMatrix, u: &[f64]) -> f64 {
    norm2(&a.tmatvec(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense(a: Array2<f64>) -> DataMatrix {
        DataMatrix::dense(a).unwrap()
    }

    #[test]
    fn rank_one_unit() {
        let t = dominant_singular_triplet(&dense(array![[1.0, 0.0], [0.0, 0.0]]), 1e-12, 100).unwrap();
        assert!((t.sigma - 1.0).abs() < 1e-14);
        assert!((t.left[0] - 1.0).abs() < 1e-14 && t.left[1].abs() < 1e-14);
        assert!((t.right[0] - 1.0).abs() < 1e-14 && t.right[1].abs() < 1e-14);
        assert!(t.converged);
    }

    #[test]
    fn single_column_closed_form() {
        let t = dominant_singular_triplet(&dense(array![[3.0, 0.0], [4.0, 0.0]]), 1e-12, 100).unwrap();
        assert!((t.sigma - 5.0).abs() < 1e-12);
        assert!((t.left[0] - 0.6).abs() < 1e-12);
        assert!((t.left[1] - 0.8).abs() < 1e-12);
        assert!((t.right[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_an_error() {
        let err = dominant_singular_triplet(&dense(Array2::zeros((2, 3))), 1e-10, 10);
        assert!(matches!(err, Err(OnmfError::ZeroMatrix)));
        assert!(matches!(
            nonneg_dominant_left_vector(&dense(Array2::zeros((2, 2)))),
            Err(OnmfError::ZeroMatrix)
        ));
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let a = dense(array![[1.0, 0.9], [0.9, 1.0], [0.2, 0.0]]);
        let t = dominant_singular_triplet(&a, 1e-300, 3).unwrap();
        assert!(!t.converged);
        assert_eq!(t.iterations, 3);
        assert!((norm2(&t.left) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_identity_gives_nonnegative_unit_vector() {
        let d = nonneg_dominant_left_vector(&dense(Array2::eye(2))).unwrap();
        assert!(d.vector.iter().all(|&x| x >= 0.0));
        assert!((norm2(&d.vector) - 1.0).abs() < 1e-12);
        assert!((captured_norm(&dense(Array2::eye(2)), &d.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_column_vector() {
        let d = nonneg_dominant_left_vector(&dense(array![[2.0], [0.0]])).unwrap();
        assert_eq!(d.vector, vec![1.0, 0.0]);
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let recon = vecs.dot(&Array2::from_diag(&Array1::from(vals))).dot(&vecs.t());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_top_two() {
        let m = dense(Array2::from_diag(&array![3.0, 2.0, 1.0]));
        let basis = top_k_right_singular_vectors(&m, 2).unwrap();
        assert!(basis.converged);
        // rows span e1, e2: the third coordinate vanishes
        for r in 0..2 {
            assert!(basis.vectors[[r, 2]].abs() < 1e-8);
        }
        assert!((basis.singular_values[0] - 3.0).abs() < 1e-10);
        assert!((basis.singular_values[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_input_still_returns_orthonormal_rows() {
        let m = dense(array![[1.0, 1.0, 0.0, 0.0], [2.0, 2.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]]);
        let basis = top_k_right_singular_vectors(&m, 3).unwrap();
        let g = basis.vectors.dot(&basis.vectors.t());
        let resid = (&g - &Array2::<f64>::eye(3)).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(resid < 1e-12, "{resid}");
        assert!(basis.converged);
    }

    #[test]
    fn k_out_of_range() {
        let m = dense(Array2::eye(2));
        assert!(top_k_right_singular_vectors(&m, 3).is_err());
        assert!(top_k_right_singular_vectors(&m, 0).is_err());
    }
}
