//! Matrix storage and the numerical kernels shared by every algorithm.

mod matrix;
mod nnls;
mod stiefel;
mod svd;

pub use matrix::{dot, frobenius, norm2, CscMatrix, DataMatrix};
pub use nnls::{kkt_residual, nnls_gram, nnls_gram_rows, nnls_solve, NnlsSolution};
pub use stiefel::{gram_residual, project_stiefel, OrthonormalRows, GRAM_RELATIVE_FLOOR, RANK_TOL};
pub use svd::{
    captured_norm, default_power_iterations, dominant_singular_triplet, nonneg_dominant_left_vector,
    symmetric_eigen, top_k_right_singular_vectors, top_k_right_singular_vectors_with, NonnegDirection,
    RightSingularBasis, SingularTriplet, POWER_TOL, SUBSPACE_MAX_SWEEPS, SUBSPACE_TOL,
};
