//! Spectral scalar functions: trace norm, entropy, Gibbs states.

use super::density::DensityMatrix;
use super::eig::HermitianOperator;
use super::matrix::{C64, ComplexMatrix};
use crate::error::Result;

/// Eigenvalues below this are treated as exact zeros by the entropy.
pub const ENTROPY_EIG_FLOOR: f64 = 1e-14;

/// ‖M‖₁ = Tr√(M†M). Hermitian inputs take the cheap single-decomposition
/// path (sum of |eigenvalue|); general inputs go through M†M.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    assert!(m.is_square(), "trace_norm expects a square matrix");
    let scale = m.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    if m.hermiticity_deviation() <= 1e-12 * scale {
        let h = HermitianOperator::new_unchecked(m.hermitize());
        return h.eig().values.iter().map(|v| v.abs()).sum();
    }
    let gram = m.dagger().matmul(m);
    let h = HermitianOperator::new_unchecked(gram.hermitize());
    h.eig().values.iter().map(|&v| v.max(0.0).sqrt()).sum()
}

/// ½‖A − B‖₁.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * trace_norm(&(a - b))
}

/// −Tr ρ ln ρ in nats; eigenvalues below 1e-14 contribute nothing.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let h = HermitianOperator::new_unchecked(rho.matrix().hermitize());
    h.eig()
        .values
        .iter()
        .filter(|&&p| p >= ENTROPY_EIG_FLOOR)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Gibbs state e^{-βH}/Z.
///
/// Populations are computed relative to the extremal eigenvalue so no
/// intermediate overflows: p_k ∝ e^{-β(ε_k - ε_ref)}. β = +∞ yields the
/// uniform mixture over the ground space (degeneracy resolved at relative
/// tolerance 1e-12 of the spectral spread).
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    assert!(!beta.is_nan(), "gibbs_state: beta must not be NaN");
    let eig = h.eig();
    let n = eig.values.len();
    let lo = eig.values.first().copied().unwrap_or(0.0);
    let hi = eig.values.last().copied().unwrap_or(0.0);

    let populations: Vec<f64> = if beta.is_infinite() {
        let tol = 1e-12 * (hi - lo).max(1e-300);
        if beta > 0.0 {
            eig.values.iter().map(|&e| if e - lo <= tol { 1.0 } else { 0.0 }).collect()
        } else {
            eig.values.iter().map(|&e| if hi - e <= tol { 1.0 } else { 0.0 }).collect()
        }
    } else {
        let eref = if beta >= 0.0 { lo } else { hi };
        eig.values.iter().map(|&e| (-beta * (e - eref)).exp()).collect()
    };
    let z: f64 = populations.iter().sum();
    debug_assert!(z > 0.0);

    let mut mat = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let p = populations[k] / z;
        if p == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = eig.vectors[(i, k)];
            if vik == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                mat[(i, j)] += vik * eig.vectors[(j, k)].conj() * p;
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(mat.hermitize()))
}
