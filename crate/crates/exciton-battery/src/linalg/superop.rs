//! Superoperators as dense d²×d² matrices over column-stacked operators.
//!
//! Convention: `vec(X)[j*d + i] = X[i, j]` (column stacking), under which
//! X ↦ A·X·B turns into the matrix Bᵀ ⊗ A acting on vec(X).

use super::eig::HermitianOperator;
use super::matrix::{C64, ComplexMatrix, ONE, ZERO};
use crate::error::{Error, Result};

/// Column-stack a square matrix into a d²×1 column vector.
pub fn vec(x: &ComplexMatrix) -> ComplexMatrix {
    assert!(x.is_square(), "vec expects a square matrix");
    let d = x.rows();
    let mut out = ComplexMatrix::zeros(d * d, 1);
    for j in 0..d {
        for i in 0..d {
            out[(j * d + i, 0)] = x[(i, j)];
        }
    }
    out
}

/// Inverse of [`vec`]: reshape a d²×1 column back into a d×d matrix.
pub fn devec(v: &ComplexMatrix, d: usize) -> ComplexMatrix {
    assert_eq!(v.shape(), (d * d, 1), "devec expects a d²×1 column");
    let mut out = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            out[(i, j)] = v[(j * d + i, 0)];
        }
    }
    out
}

/// Diagnostics from a complete-positivity / trace-preservation check.
#[derive(Clone, Copy, Debug)]
pub struct CptpReport {
    /// max |C - C†| of the Choi matrix.
    pub hermiticity_deviation: f64,
    /// Smallest eigenvalue of the (hermitized) Choi matrix.
    pub min_choi_eigenvalue: f64,
    /// max |Tr_out C - I| over entries.
    pub trace_preservation_deviation: f64,
    /// Tolerance the verdict was taken against.
    pub tolerance: f64,
    pub cptp: bool,
}

/// A linear map on d×d operators, stored as its d²×d² matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperatorMatrix {
    mat: ComplexMatrix,
    dim: usize,
}

impl SuperOperatorMatrix {
    pub fn from_matrix(mat: ComplexMatrix) -> Result<Self> {
        mat.require_square("SuperOperatorMatrix")?;
        let d2 = mat.rows();
        let dim = (d2 as f64).sqrt().round() as usize;
        if dim * dim != d2 {
            return Err(Error::ShapeMismatch {
                context: "SuperOperatorMatrix",
                expected: "perfect-square dimension".into(),
                got: format!("{d2}"),
            });
        }
        Ok(Self { mat, dim })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: ComplexMatrix::zeros(dim * dim, dim * dim), dim }
    }

    /// The identity map X ↦ X.
    pub fn identity_map(dim: usize) -> Self {
        Self { mat: ComplexMatrix::identity(dim * dim), dim }
    }

    /// The map X ↦ A·X·B, i.e. Bᵀ ⊗ A in the column-stacking convention.
    pub fn left_right(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        assert!(a.is_square() && b.is_square() && a.rows() == b.rows());
        Self { mat: b.transpose().kron(a), dim: a.rows() }
    }

    pub fn left_mult(a: &ComplexMatrix) -> Self {
        Self::left_right(a, &ComplexMatrix::identity(a.rows()))
    }

    pub fn right_mult(b: &ComplexMatrix) -> Self {
        Self::left_right(&ComplexMatrix::identity(b.rows()), b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// Apply the map to an operator.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(x.shape(), (self.dim, self.dim), "superoperator apply shape");
        devec(&self.mat.matmul(&vec(x)), self.dim)
    }

    /// Composition: (self ∘ other)(X) = self(other(X)).
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { mat: self.mat.matmul(&other.mat), dim: self.dim }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { mat: self.mat.scale(s), dim: self.dim }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { mat: &self.mat + &other.mat, dim: self.dim }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { mat: &self.mat - &other.mat, dim: self.dim }
    }

    /// Exponential of the map's matrix: X ↦ e^{self}(X).
    pub fn expm(&self) -> Result<Self> {
        Ok(Self { mat: super::expm::expm(&self.mat)?, dim: self.dim })
    }

    /// Choi matrix C = Σ_{ij} |i⟩⟨j| ⊗ Φ(|i⟩⟨j|), so
    /// C[(i·d+k),(j·d+l)] = Φ(|i⟩⟨j|)[k,l].
    pub fn choi_matrix(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut c = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        c[(i * d + k, j * d + l)] = self.mat[(l * d + k, j * d + i)];
                    }
                }
            }
        }
        c
    }

    /// Complete positivity and trace preservation, judged on the Choi matrix
    /// with the given absolute tolerance.
    pub fn cptp_report(&self, tolerance: f64) -> CptpReport {
        let d = self.dim;
        let choi = self.choi_matrix();
        let hermiticity_deviation = choi.hermiticity_deviation();

        let mut trace_preservation_deviation = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += choi[(i * d + k, j * d + k)];
                }
                let expect = if i == j { ONE } else { ZERO };
                trace_preservation_deviation = trace_preservation_deviation.max((acc - expect).norm());
            }
        }

        let herm = HermitianOperator::new_unchecked(choi.hermitize());
        let eig = herm.eig();
        let min_choi_eigenvalue = eig.values.first().copied().unwrap_or(0.0);

        let cptp = hermiticity_deviation <= tolerance
            && min_choi_eigenvalue >= -tolerance
            && trace_preservation_deviation <= tolerance;
        CptpReport {
            hermiticity_deviation,
            min_choi_eigenvalue,
            trace_preservation_deviation,
            tolerance,
            cptp,
        }
    }

    pub fn is_cptp(&self, tolerance: f64) -> bool {
        self.cptp_report(tolerance).cptp
    }
}
