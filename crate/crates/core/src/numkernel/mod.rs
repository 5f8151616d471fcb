//! Dense real linear algebra: matrices, factorizations, spectra.

mod decomp;
mod eigen;
mod lu;
mod matrix;

pub use decomp::{
    frobenius_norm, is_psd, left_basis, mat_pow, pinv, qr, qr_full, rank, rank_from_singular_values,
    singular_values, spectral_norm, svd, symmetric_eigen, Svd,
};
pub use eigen::{eigenvalues, hessenberg, real_schur, spectral_radius, RealSchur};
pub use lu::{determinant, inverse, solve, Lu};
pub use matrix::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix has an empty dimension")]
    Empty,
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected a square matrix, got {0:?}")]
    NotSquare((usize, usize)),
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is ill-conditioned (rcond = {rcond:e})")]
    IllConditioned { rcond: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },
}
