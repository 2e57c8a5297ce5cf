//! Sparse matrices, incomplete factorization and Krylov iterations.

pub mod krylov;
pub mod sparse;

pub use krylov::{bicgstab, pcg, IdentityPreconditioner, KrylovOptions, KrylovStats, LinearOperator, Preconditioner};
pub use sparse::{CsrMatrix, Ilu0};
