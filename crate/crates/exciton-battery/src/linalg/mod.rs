//! Dense complex linear algebra tuned for operator-space work: row-major
//! matrices, Jacobi Hermitian eigensolves, Padé matrix exponentials, and the
//! column-stacking superoperator calculus everything downstream builds on.

pub mod density;
pub mod eig;
pub mod expm;
pub mod functions;
pub mod matrix;
pub mod sampling;
pub mod superop;

pub use density::DensityMatrix;
pub use eig::{EigenDecomposition, HermitianOperator, herm_eig};
pub use expm::{expm, solve_linear};
pub use functions::{gibbs_state, trace_distance, trace_norm, von_neumann_entropy};
pub use matrix::{C64, ComplexMatrix, I, ONE, ZERO, partial_trace};
pub use superop::{CptpReport, SuperOperatorMatrix, devec, vec};
