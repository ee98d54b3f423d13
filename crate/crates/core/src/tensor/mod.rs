//! Hermitian matrices, tripartite density matrices, and partial traces.
//!
//! Composite basis index is `(a·M + b)·N + c`: A is the slowest factor, C the fastest.

mod density;
mod eigen;
mod io;
mod matrix;

pub use density::{partial_trace, spectrum_of, DensityMatrix, Party, PartySet, TripartiteDims, TRACE_TOL};
pub use eigen::{hermitian_eigenvalues, CLAMP_TOL, OFF_DIAGONAL_TOL};
pub use io::{density_from_json, density_to_json, read_density, write_density};
pub use matrix::{ComplexMatrix, HERMITIAN_TOL};
