//! Validated density matrices.

use super::eig::HermitianOperator;
use super::matrix::{C64, ComplexMatrix};
use crate::error::{Error, Result};

/// Unit-trace, Hermitian, positive-semidefinite matrix.
///
/// `new` enforces all three properties (trace to 1e-10, Hermiticity relative
/// to the entry scale, eigenvalues ≥ -1e-10); use it at API boundaries.
/// Internal algorithms that construct states by provably-positive means go
/// through `new_unchecked`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

pub const DENSITY_TRACE_TOL: f64 = 1e-10;
pub const DENSITY_EIG_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        mat.require_square("DensityMatrix")?;
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensity {
                reason: format!("trace is {tr:.6e}, expected 1 within {DENSITY_TRACE_TOL:.0e}"),
            });
        }
        let herm = HermitianOperator::new(mat).map_err(|e| match e {
            Error::NotHermitian { deviation, tolerance } => Error::InvalidDensity {
                reason: format!("not Hermitian: deviation {deviation:.3e} > {tolerance:.3e}"),
            },
            other => other,
        })?;
        let eig = herm.eig();
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -DENSITY_EIG_TOL {
            return Err(Error::InvalidDensity {
                reason: format!("negative eigenvalue {min:.3e} below -{DENSITY_EIG_TOL:.0e}"),
            });
        }
        Ok(Self { mat: herm.into_matrix() })
    }

    pub fn new_unchecked(mat: ComplexMatrix) -> Self {
        debug_assert!(mat.is_square());
        Self { mat }
    }

    /// Builds a state from a matrix that is a density matrix up to numerical
    /// debris: the input is Hermitized, eigenvalues in `[-neg_tol, 0)` are
    /// clipped to zero, and the spectrum is renormalized to unit trace.
    /// Eigenvalues below `-neg_tol` are a real failure, not debris, and are
    /// rejected.
    pub fn from_clipped(mat: &ComplexMatrix, neg_tol: f64) -> Result<Self> {
        mat.require_square("DensityMatrix::from_clipped")?;
        let herm = HermitianOperator::new_unchecked(mat.hermitize());
        let mut eig = herm.eig();
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -neg_tol {
            return Err(Error::InvalidDensity {
                reason: format!("negative eigenvalue {min:.3e} below -{neg_tol:.0e}"),
            });
        }
        for v in &mut eig.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = eig.values.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDensity {
                reason: "matrix has no positive weight to normalize".into(),
            });
        }
        for v in &mut eig.values {
            *v /= total;
        }
        Ok(Self { mat: eig.reconstruct() })
    }

    /// |ψ⟩⟨ψ| from an unnormalized state vector.
    pub fn from_pure(state: &[C64]) -> Result<Self> {
        let norm_sq: f64 = state.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(Error::InvalidDensity { reason: "zero state vector".into() });
        }
        let d = state.len();
        let mut mat = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = state[i] * state[j].conj() / norm_sq;
            }
        }
        Ok(Self { mat })
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(d: usize) -> Self {
        Self { mat: ComplexMatrix::identity(d).scale_re(1.0 / d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// ⟨O⟩ = Tr(ρ·O).
    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        assert_eq!(op.shape(), self.mat.shape(), "expectation shape mismatch");
        let mut acc = C64::new(0.0, 0.0);
        let d = self.dim();
        for i in 0..d {
            for k in 0..d {
                acc += self.mat[(i, k)] * op[(k, i)];
            }
        }
        acc
    }
}
