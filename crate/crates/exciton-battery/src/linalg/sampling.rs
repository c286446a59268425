//! Seeded random matrix ensembles for tests and self-checks.

use super::density::DensityMatrix;
use super::eig::HermitianOperator;
use super::matrix::{C64, ComplexMatrix};
use rand::Rng;

/// One standard normal variate (Box–Muller; two uniforms per call keeps the
/// stream layout independent of call parity).
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    C64::new(standard_normal(rng), standard_normal(rng))
}

/// Ginibre matrix: independent complex-normal entries.
pub fn random_ginibre<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

/// GUE-like Hermitian matrix with entries of typical size `scale`.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, scale: f64) -> HermitianOperator {
    let g = random_ginibre(rng, n);
    HermitianOperator::new_unchecked(g.hermitize().scale_re(scale))
}

/// Haar-distributed unitary via modified Gram–Schmidt on a Ginibre matrix,
/// with the R-diagonal phase fixed to make the distribution exactly Haar.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_ginibre(rng, n);
    let mut q = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut col: Vec<C64> = (0..n).map(|i| g[(i, j)]).collect();
        for k in 0..j {
            let mut proj = C64::new(0.0, 0.0);
            for i in 0..n {
                proj += q[(i, k)].conj() * col[i];
            }
            for i in 0..n {
                col[i] -= proj * q[(i, k)];
            }
        }
        // Dividing by the (real, positive) norm makes the R diagonal real
        // positive, which is exactly the phase convention that turns QR of a
        // Ginibre matrix into a Haar sample.
        let norm: f64 = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] = col[i] / norm;
        }
    }
    q
}

/// Hilbert–Schmidt-distributed density matrix: G·G†, normalized.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> DensityMatrix {
    let g = random_ginibre(rng, n);
    let pos = g.matmul(&g.dagger());
    let tr = pos.trace().re;
    DensityMatrix::new_unchecked(pos.scale_re(1.0 / tr).hermitize())
}
