//! Hermitian eigendecomposition by cyclic Jacobi rotations.
//!
//! Dependency-free and deterministic: the sweep order is fixed, so identical
//! inputs produce bit-identical eigenpairs. Intended for dense problems up to
//! a few hundred rows; accuracy is O(n·ε)·‖H‖ on the reconstruction.

use super::matrix::{C64, ComplexMatrix, ONE, ZERO};
use crate::error::{Error, Result};

/// Relative Hermiticity tolerance enforced by [`HermitianOperator::new`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A validated Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    mat: ComplexMatrix,
}

impl HermitianOperator {
    /// Validate squareness and max |H - H†| ≤ 1e-12 · max |H|.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        mat.require_square("HermitianOperator")?;
        let scale = mat.max_abs().max(1e-300);
        let dev = mat.hermiticity_deviation();
        if dev > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian { deviation: dev, tolerance: HERMITICITY_TOL * scale });
        }
        // Store the exactly-Hermitian average so downstream algebra sees H = H†.
        Ok(Self { mat: mat.hermitize() })
    }

    pub(crate) fn new_unchecked(mat: ComplexMatrix) -> Self {
        debug_assert!(mat.is_square());
        Self { mat }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn eig(&self) -> EigenDecomposition {
        herm_eig(self)
    }
}

/// Result of [`herm_eig`]: H = V · diag(values) · V†, values ascending,
/// eigenvectors as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// V · diag(f(λ)) · V†.
    pub fn apply_function(&self, mut f: impl FnMut(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let fk = f(self.values[k]);
            if fk == ZERO {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * fk;
                if vik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_function(|x| C64::new(x, 0.0))
    }
}

/// Eigendecomposition of a Hermitian matrix via cyclic complex Jacobi.
pub fn herm_eig(h: &HermitianOperator) -> EigenDecomposition {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut v = ComplexMatrix::identity(n);

    if n > 1 {
        let fro = a.frobenius_norm().max(1e-300);
        let tol = 1e-15 * fro;
        const MAX_SWEEPS: usize = 64;
        for _sweep in 0..MAX_SWEEPS {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if (2.0 * off).sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    // Diagonal holds the eigenvalues; sort ascending (stable: ties keep the
    // Jacobi column order, which is itself deterministic).
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());

    let mut values = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(diag[src]);
        // Canonical phase: make the largest-magnitude component real positive.
        let mut imax = 0;
        let mut best = -1.0f64;
        for i in 0..n {
            let m = v[(i, src)].norm_sqr();
            if m > best {
                best = m;
                imax = i;
            }
        }
        let pivot = v[(imax, src)];
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { ONE };
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)] * phase;
        }
    }

    EigenDecomposition { values, vectors }
}

/// One Jacobi rotation annihilating a[(p, q)]; updates a (two rows + two
/// columns) and accumulates the rotation into the eigenvector matrix v.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase = apq / r; // e^{iφ}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    // Smaller-magnitude root of t² + 2τt − 1 = 0.
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let n = a.rows();
    let sp = phase * s; // s·e^{iφ}
    let spc = sp.conj(); // s·e^{−iφ}

    // Column update: A ← A·G with G[p][p]=c, G[p][q]=s·e^{iφ}, G[q][p]=−s·e^{−iφ}, G[q][q]=c.
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * spc;
        a[(k, q)] = akp * sp + akq * c;
    }
    // Row update: A ← G†·A.
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * sp;
        a[(q, k)] = apk * spc + aqk * c;
    }
    // Clean the annihilated pair and enforce real diagonal.
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    // Accumulate eigenvectors: V ← V·G.
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * spc;
        v[(k, q)] = vkp * sp + vkq * c;
    }
}
