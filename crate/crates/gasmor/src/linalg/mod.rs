//! Linear algebra building blocks: sparse storage, banded LU, dense decompositions.

pub mod banded;
pub mod dense;
pub mod sparse;

pub use banded::LinearSolver;
pub use sparse::Csr;
