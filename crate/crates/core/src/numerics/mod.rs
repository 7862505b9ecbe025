//! Shared numerical kernels: dense Hermitian eigendecomposition, matrix
//! functions, simplex minimization and reproducible random streams.

mod linalg;
mod nelder_mead;
mod rng;

pub use linalg::{
    dagger, eig_hermitian, expm, expm_real, hermitian_deviation, inv_sqrt_psd, kron,
    unitary_deviation, unitary_from_hermitian, CMatrix, C64,
};
pub use nelder_mead::{nelder_mead, SimplexOptions, SimplexResult};
pub use rng::SeedStream;
