//! Dense vectors and matrices, factorizations, eigenvalues and the seeded
//! generator shared by every experiment.

mod cholesky;
mod eigen;
mod lu;
mod matrix;
mod qr;
mod rng;
pub(crate) mod vector;

pub use cholesky::{weighted_norm_hinv, Cholesky};
pub use eigen::{eigen_residual, eigenvalues, eigenvector, spectral_norm, ComplexScalar, MAX_EIGEN_DIM};
pub use lu::{lu_solve, Lu, PIVOT_RTOL};
pub use matrix::{fmt_f64, Matrix};
pub use qr::{qr_least_squares, Qr, RANK_RTOL};
pub use rng::{rng_next_uniform, Rng};
pub use vector::{axpy, distance, dot, norm, Vector};

pub(crate) use matrix::write_csv_row;
