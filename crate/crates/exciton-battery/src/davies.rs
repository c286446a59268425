//! Weak-coupling (Davies) generators: Bohr decomposition of coupling
//! operators, GKLS assembly against a [`CouplingSpectrum`], superoperator
//! conversion, stationary states, and time propagation.
//!
//! Conventions, used consistently across the crate:
//!
//! * A Bohr component `S_ω` collects the matrix elements of `S` between
//!   eigenstates separated by `ε_k − ε_l = ω`, so `ω > 0` components *lower*
//!   the system energy by `ω` and the interaction-picture operator is
//!   `e^{iHt} S e^{−iHt} = Σ_ω e^{−iωt} S_ω`.
//! * A generator channel `(rate, L)` contributes the standard dissipator
//!   `rate · (LρL† − ½{L†L, ρ})`; rates are the full physical products of
//!   squared coupling constant and spectral density (`ħ = 1` throughout).
//! * The Hamiltonian part is the bare `−i[H, ρ]`: renormalization shifts are
//!   taken as already absorbed into `H` (the finite-time propagator module
//!   computes them explicitly instead).

use crate::error::{Error, Result};
use crate::linalg::{
    C64, ComplexMatrix, DensityMatrix, EigenDecomposition, HermitianOperator, ONE,
    SuperOperatorMatrix, ZERO, expm, trace_norm,
};
use crate::spectra::CouplingSpectrum;

/// Largest dimension for which stationary states and propagation go through
/// the dense `d² × d²` superoperator. Above this the solvers switch to the
/// secular-block path.
const DENSE_DIM_LIMIT: usize = 20;

/// Hard cap for materializing superoperator matrices.
const MAX_SUPEROP_DIM: usize = 32;

/// Singular-value threshold that counts a superoperator kernel vector.
const KERNEL_TOL: f64 = 1e-9;

/// Certified bound on ‖𝓛ρ_st‖₁ for a returned stationary state.
const STATIONARY_RESIDUAL_TOL: f64 = 1e-9;

/// Allowed trace drift under propagation.
const TRACE_DRIFT_TOL: f64 = 1e-9;

/// Eigenvalue clip window when converting solver output to a density matrix:
/// eigenvalues in `[-CLIP_TOL, 0)` are treated as numerical debris.
const CLIP_TOL: f64 = 1e-10;

/// Default frequency-clustering tolerance: `1e-9` of the spectral spread.
/// Only exact degeneracies are meant to cluster; near-degenerate frequencies
/// are out of scope.
pub fn default_cluster_tol(eigenvalues: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &e in eigenvalues {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if hi > lo {
        1e-9 * (hi - lo)
    } else {
        f64::MIN_POSITIVE
    }
}

/// Groups the values (tagged with index pairs) into clusters whose
/// consecutive sorted gaps stay within `tol`; returns `(mean, members)` per
/// cluster, ascending in the mean.
fn cluster_pairs(mut items: Vec<(f64, usize, usize)>, tol: f64) -> Vec<(f64, Vec<(usize, usize)>)> {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut start = 0;
    for idx in 1..=items.len() {
        if idx == items.len() || items[idx].0 - items[idx - 1].0 > tol {
            let slice = &items[start..idx];
            let mean = slice.iter().map(|x| x.0).sum::<f64>() / slice.len() as f64;
            out.push((mean, slice.iter().map(|x| (x.1, x.2)).collect()));
            start = idx;
        }
    }
    out
}

/// Decomposition of a coupling operator over the Bohr frequencies of a
/// Hamiltonian: `S = Σ_ω S_ω` with `S_ω = Σ_{ε_k−ε_l=ω} |l⟩⟨l|S|k⟩⟨k|`.
///
/// Terms are sorted by frequency. When `S` is Hermitian the decomposition is
/// conjugate-symmetric: `S_{−ω} = S_ω†`.
#[derive(Clone, Debug)]
pub struct BohrDecomposition {
    pub terms: Vec<(f64, ComplexMatrix)>,
}

impl BohrDecomposition {
    /// The component at `ω` within `tol`, if present.
    pub fn component(&self, omega: f64, tol: f64) -> Option<&ComplexMatrix> {
        self.terms
            .iter()
            .find(|(w, _)| (w - omega).abs() <= tol)
            .map(|(_, m)| m)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|(w, _)| *w)
    }
}

/// Splits `s` into Bohr components against `h`. Frequencies within
/// `cluster_tol` of each other are merged (pass a non-positive value to get
/// [`default_cluster_tol`]); components with no weight above `1e-14` of the
/// operator scale are dropped.
pub fn bohr_decompose(
    h: &HermitianOperator,
    s: &ComplexMatrix,
    cluster_tol: f64,
) -> Result<BohrDecomposition> {
    s.require_square("bohr_decompose")?;
    let d = h.dim();
    if s.rows() != d {
        return Err(Error::ShapeMismatch {
            context: "bohr_decompose",
            expected: format!("{d}x{d}"),
            got: format!("{}x{}", s.rows(), s.cols()),
        });
    }
    let eig = h.eig();
    let v = &eig.vectors;
    let vd = v.dagger();
    let s_eig = vd.matmul(s).matmul(v);

    let tol = if cluster_tol > 0.0 {
        cluster_tol
    } else {
        default_cluster_tol(&eig.values)
    };
    // Entry (l, k) of the eigenbasis matrix belongs to the component at
    // ω = ε_k − ε_l.
    let mut items = Vec::with_capacity(d * d);
    for l in 0..d {
        for k in 0..d {
            items.push((eig.values[k] - eig.values[l], l, k));
        }
    }
    let scale = s.max_abs();
    let mut terms = Vec::new();
    for (omega, members) in cluster_pairs(items, tol) {
        let mut comp_eig = ComplexMatrix::zeros(d, d);
        for &(l, k) in &members {
            comp_eig[(l, k)] = s_eig[(l, k)];
        }
        if comp_eig.max_abs() <= 1e-14 * scale {
            continue;
        }
        terms.push((omega, v.matmul(&comp_eig).matmul(&vd)));
    }

    let mut recon = ComplexMatrix::zeros(d, d);
    for (_, m) in &terms {
        recon.axpy_re(1.0, m);
    }
    if recon.max_abs_diff(s) > 1e-11 * scale.max(1.0) {
        return Err(Error::NumericalFailure {
            what: format!(
                "Bohr components do not reconstruct the coupling operator \
                 (deviation {:.3e})",
                recon.max_abs_diff(s)
            ),
        });
    }
    Ok(BohrDecomposition { terms })
}

/// How a coupling operator enters the microscopic interaction.
#[derive(Clone, Debug)]
pub enum CouplingOperator {
    /// `S ⊗ R` with Hermitian `S`: every signed Bohr component of `S`
    /// receives its own channel.
    Hermitian(ComplexMatrix),
    /// Rotating-wave form `S⁻ ⊗ R⁺ + S⁺ ⊗ R⁻`: the stored operator is `S⁻`
    /// (lowers system energy). Downward channels take the spectrum at `+ω`,
    /// upward channels its value at `−ω`.
    RotatingWave { lowering: ComplexMatrix },
}

/// GKLS generator in diagonal form: Hamiltonian plus weighted jump channels.
#[derive(Clone, Debug)]
pub struct GKLSGenerator {
    hamiltonian: HermitianOperator,
    channels: Vec<(f64, ComplexMatrix)>,
}

impl GKLSGenerator {
    /// Validates rates (finite, nonnegative) and channel dimensions.
    /// Channels with exactly zero rate are dropped.
    pub fn new(
        hamiltonian: HermitianOperator,
        channels: Vec<(f64, ComplexMatrix)>,
    ) -> Result<Self> {
        let d = hamiltonian.dim();
        let mut kept = Vec::with_capacity(channels.len());
        for (rate, jump) in channels {
            if !rate.is_finite() || rate < 0.0 {
                return Err(Error::InvariantViolation {
                    what: format!("channel rate {rate} must be finite and nonnegative"),
                });
            }
            if jump.shape() != (d, d) {
                return Err(Error::ShapeMismatch {
                    context: "GKLSGenerator channel",
                    expected: format!("{d}x{d}"),
                    got: format!("{}x{}", jump.rows(), jump.cols()),
                });
            }
            if rate > 0.0 {
                kept.push((rate, jump));
            }
        }
        Ok(Self {
            hamiltonian,
            channels: kept,
        })
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[(f64, ComplexMatrix)] {
        &self.channels
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Largest channel rate; 0 for a purely Hamiltonian generator.
    pub fn max_rate(&self) -> f64 {
        self.channels.iter().map(|(r, _)| *r).fold(0.0, f64::max)
    }

    /// Direct action `𝓛ρ = −i[H,ρ] + Σ rate·(LρL† − ½{L†L, ρ})`.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self
            .hamiltonian
            .matrix()
            .commutator(rho)
            .scale(C64::new(0.0, -1.0));
        for (rate, l) in &self.channels {
            let ld = l.dagger();
            let sandwich = l.matmul(rho).matmul(&ld);
            let ll = ld.matmul(l);
            out.axpy_re(*rate, &sandwich);
            out.axpy_re(-0.5 * rate, &ll.matmul(rho));
            out.axpy_re(-0.5 * rate, &rho.matmul(&ll));
        }
        out
    }
}

/// Builds the Davies generator for a system `h` coupled to independent baths:
/// one channel `(G(ω), S_ω)` per signed Bohr frequency of each coupling.
///
/// Spectra are validated first, and every evaluated spectral value must be
/// nonnegative; a tabulated spectrum whose range does not cover the Bohr
/// frequencies surfaces as an extrapolation error.
pub fn assemble_davies(
    h: &HermitianOperator,
    couplings: &[(CouplingOperator, CouplingSpectrum)],
    cluster_tol: f64,
) -> Result<GKLSGenerator> {
    let mut channels = Vec::new();
    for (op, spec) in couplings {
        spec.validate()?;
        let rate_at = |omega: f64| -> Result<f64> {
            let g = spec.eval(omega)?;
            if g < 0.0 {
                return Err(Error::InvariantViolation {
                    what: format!("spectrum value G({omega}) = {g} is negative"),
                });
            }
            Ok(g)
        };
        match op {
            CouplingOperator::Hermitian(s) => {
                // Enforce Hermiticity and decompose the cleaned operator, so
                // that S_{−ω} = S_ω† holds exactly.
                let s = HermitianOperator::new(s.clone())?;
                for (omega, jump) in bohr_decompose(h, s.matrix(), cluster_tol)?.terms {
                    channels.push((rate_at(omega)?, jump));
                }
            }
            CouplingOperator::RotatingWave { lowering } => {
                for (omega, jump) in bohr_decompose(h, lowering, cluster_tol)?.terms {
                    channels.push((rate_at(-omega)?, jump.dagger()));
                    channels.push((rate_at(omega)?, jump));
                }
            }
        }
    }
    GKLSGenerator::new(h.clone(), channels)
}

/// Materializes the generator as a `d² × d²` matrix under column stacking.
/// Refuses dimensions above 32 (the dense superoperator grows as `d⁴`).
pub fn generator_superop(g: &GKLSGenerator) -> Result<SuperOperatorMatrix> {
    let d = g.dim();
    if d > MAX_SUPEROP_DIM {
        return Err(Error::ResourceLimit {
            what: format!("dense superoperator requested for dim {d} (cap {MAX_SUPEROP_DIM})"),
        });
    }
    let h = g.hamiltonian().matrix();
    let mut m = SuperOperatorMatrix::left_mult(h)
        .sub(&SuperOperatorMatrix::right_mult(h))
        .scale(C64::new(0.0, -1.0));
    for (rate, l) in g.channels() {
        let ld = l.dagger();
        let ll = ld.matmul(l);
        m = m
            .add(&SuperOperatorMatrix::left_right(l, &ld).scale_re(*rate))
            .sub(&SuperOperatorMatrix::left_mult(&ll).scale_re(0.5 * rate))
            .sub(&SuperOperatorMatrix::right_mult(&ll).scale_re(0.5 * rate));
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// Secular-block representation.
//
// In the H eigenbasis a secular generator couples the matrix element ρ_{rc}
// only to elements with the same Bohr frequency ε_r − ε_c. Grouping the d²
// index pairs by clustered frequency block-diagonalizes the generator into
// pieces of size ~d instead of one d²×d² matrix, which is what makes
// stationary states and propagation viable for the vibrational models.
// ---------------------------------------------------------------------------

struct Block {
    omega: f64,
    pairs: Vec<(usize, usize)>,
    mat: ComplexMatrix,
}

struct SecularBlocks {
    eig: EigenDecomposition,
    blocks: Vec<Block>,
}

fn build_secular_blocks(g: &GKLSGenerator) -> Result<SecularBlocks> {
    let d = g.dim();
    let eig = g.hamiltonian().eig();
    let eps = eig.values.clone();

    let mut items = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            items.push((eps[r] - eps[c], r, c));
        }
    }
    // Pair frequencies span twice the spectral spread; same relative rule.
    let tol = 2.0 * default_cluster_tol(&eps);
    let clusters = cluster_pairs(items, tol);

    let mut index = vec![(0u32, 0u32); d * d];
    let mut blocks: Vec<Block> = Vec::with_capacity(clusters.len());
    for (bi, (omega, pairs)) in clusters.into_iter().enumerate() {
        for (pos, &(r, c)) in pairs.iter().enumerate() {
            index[r * d + c] = (bi as u32, pos as u32);
        }
        let n = pairs.len();
        let mut mat = ComplexMatrix::zeros(n, n);
        for (pos, &(r, c)) in pairs.iter().enumerate() {
            mat[(pos, pos)] = C64::new(0.0, -(eps[r] - eps[c]));
        }
        blocks.push(Block { omega, pairs, mat });
    }

    let v = &eig.vectors;
    let vd = v.dagger();
    let mut q = ComplexMatrix::zeros(d, d);
    let mut out_of_block = 0.0f64;
    let mut scale = 0.0f64;

    for (rate, l) in g.channels() {
        let lp = vd.matmul(l).matmul(v);
        let lmax = lp.max_abs();
        scale += rate * lmax * lmax;
        // Keep only genuine entries: the basis change leaves ~1e-16-scale
        // debris in elements that are exact zeros of the Bohr structure.
        let threshold = 1e-12 * lmax;
        let mut entries: Vec<(usize, usize, C64)> = Vec::new();
        for r in 0..d {
            for c in 0..d {
                let x = lp[(r, c)];
                if x.norm() > threshold {
                    entries.push((r, c, x));
                }
            }
        }
        // Q accumulates Σ rate·L†L, row-grouped product of the kept entries.
        let mut row_start = 0;
        while row_start < entries.len() {
            let m = entries[row_start].0;
            let mut row_end = row_start;
            while row_end < entries.len() && entries[row_end].0 == m {
                row_end += 1;
            }
            for &(_, a, xa) in &entries[row_start..row_end] {
                for &(_, b, xb) in &entries[row_start..row_end] {
                    q[(a, b)] += xa.conj() * xb * *rate;
                }
            }
            row_start = row_end;
        }
        // Sandwich term: coefficient rate·L_{ik}·conj(L_{jl}) maps ρ_{kl}
        // into (𝓛ρ)_{ij}.
        for &(i, k, x) in &entries {
            for &(j, l, y) in &entries {
                let w = x * y.conj() * *rate;
                let (b1, p1) = index[i * d + j];
                let (b2, p2) = index[k * d + l];
                if b1 == b2 {
                    blocks[b1 as usize].mat[(p1 as usize, p2 as usize)] += w;
                } else {
                    out_of_block += w.norm();
                }
            }
        }
    }

    // Anticommutator: −½(Qρ + ρQ) with Q = Σ rate·L†L.
    for bi in 0..blocks.len() {
        let pairs = blocks[bi].pairs.clone();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for k in 0..d {
                let qik = q[(i, k)];
                if qik.norm() > 0.0 {
                    let (b2, p2) = index[k * d + j];
                    if b2 as usize == bi {
                        blocks[bi].mat[(p, p2 as usize)] -= qik * 0.5;
                    } else {
                        out_of_block += 0.5 * qik.norm();
                    }
                }
                let qkj = q[(k, j)];
                if qkj.norm() > 0.0 {
                    let (b2, p2) = index[i * d + k];
                    if b2 as usize == bi {
                        blocks[bi].mat[(p, p2 as usize)] -= qkj * 0.5;
                    } else {
                        out_of_block += 0.5 * qkj.norm();
                    }
                }
            }
        }
    }

    if out_of_block > 1e-10 * scale.max(1.0) {
        return Err(Error::InvariantViolation {
            what: format!(
                "generator is not secular: {out_of_block:.3e} of dissipative weight \
                 couples distinct Bohr-frequency sectors; the block solvers need \
                 jumps that are single Bohr components"
            ),
        });
    }
    Ok(SecularBlocks { eig, blocks })
}

// ---------------------------------------------------------------------------
// Stationary states.
// ---------------------------------------------------------------------------

/// Kernel candidates of one block: orthonormal vectors with ‖Mv‖₂ < tol.
fn block_kernel_candidates(block: &Block) -> Vec<Vec<C64>> {
    let n = block.pairs.len();
    // Cheap exclusion: M = −iω̄·I + M̃, so σ_min(M) ≥ |ω̄| − ‖M̃‖_F. Blocks
    // oscillating much faster than their dissipative width cannot hold a
    // kernel vector.
    let mut tilde = block.mat.clone();
    for p in 0..n {
        tilde[(p, p)] += C64::new(0.0, block.omega);
    }
    if block.omega.abs() - tilde.frobenius_norm() > 1e-6 {
        return Vec::new();
    }
    let k = block.mat.dagger().matmul(&block.mat);
    let eig = HermitianOperator::new_unchecked(k.hermitize()).eig();
    let mut found = Vec::new();
    for col in 0..n {
        // Direct residual: the eigenvalues of M†M near zero are dominated by
        // rounding, but ‖Mv‖ for an explicit vector is accurate.
        let vcol: Vec<C64> = (0..n).map(|r| eig.vectors[(r, col)]).collect();
        let mut norm_sq = 0.0;
        for r in 0..n {
            let mut acc = ZERO;
            for c in 0..n {
                acc += block.mat[(r, c)] * vcol[c];
            }
            norm_sq += acc.norm_sqr();
        }
        if norm_sq.sqrt() < KERNEL_TOL {
            found.push(vcol);
        }
    }
    found
}

/// Converts a kernel vector (as a matrix in the computational basis) into a
/// certified stationary density matrix.
fn finish_stationary(g: &GKLSGenerator, x: &ComplexMatrix) -> Result<DensityMatrix> {
    let tr = x.trace();
    if tr.norm() < 1e-12 * x.max_abs() * x.rows() as f64 {
        return Err(Error::NumericalFailure {
            what: "stationary kernel vector is traceless; cannot normalize to a state".into(),
        });
    }
    // Rotate the arbitrary global phase so the trace is real and positive.
    let aligned = x.scale(tr.conj() / tr.norm());
    let rho = DensityMatrix::from_clipped(&aligned, CLIP_TOL)?;
    let residual = trace_norm(&g.apply(rho.matrix()));
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::NumericalFailure {
            what: format!(
                "stationary candidate has ‖𝓛ρ‖₁ = {residual:.3e} (tolerance \
                 {STATIONARY_RESIDUAL_TOL:.0e})"
            ),
        });
    }
    Ok(rho)
}

fn stationary_dense(g: &GKLSGenerator) -> Result<DensityMatrix> {
    let d = g.dim();
    let m = generator_superop(g)?;
    let mm = m.matrix();
    let k = mm.dagger().matmul(mm);
    let eig = HermitianOperator::new_unchecked(k.hermitize()).eig();
    let n = d * d;
    let mut kernel: Vec<ComplexMatrix> = Vec::new();
    for col in 0..n {
        let mut norm_sq = 0.0;
        for r in 0..n {
            let mut acc = ZERO;
            for c in 0..n {
                acc += mm[(r, c)] * eig.vectors[(c, col)];
            }
            norm_sq += acc.norm_sqr();
        }
        if norm_sq.sqrt() < KERNEL_TOL {
            let v: Vec<C64> = (0..n).map(|r| eig.vectors[(r, col)]).collect();
            kernel.push(crate::linalg::devec(&ComplexMatrix::col_vector(&v), d));
        }
    }
    match kernel.len() {
        0 => Err(Error::NumericalFailure {
            what: format!("no superoperator kernel within |λ| < {KERNEL_TOL:.0e}"),
        }),
        1 => finish_stationary(g, &kernel[0]),
        dim => Err(Error::NonErgodic { kernel_dim: dim }),
    }
}

fn stationary_blockwise(g: &GKLSGenerator) -> Result<DensityMatrix> {
    let d = g.dim();
    let sb = build_secular_blocks(g)?;
    let mut found: Vec<(usize, Vec<C64>)> = Vec::new();
    for (bi, block) in sb.blocks.iter().enumerate() {
        for v in block_kernel_candidates(block) {
            found.push((bi, v));
        }
    }
    match found.len() {
        0 => Err(Error::NumericalFailure {
            what: format!("no superoperator kernel within |λ| < {KERNEL_TOL:.0e}"),
        }),
        1 => {
            let (bi, vcol) = &found[0];
            let block = &sb.blocks[*bi];
            let mut x_eig = ComplexMatrix::zeros(d, d);
            for (pos, &(r, c)) in block.pairs.iter().enumerate() {
                x_eig[(r, c)] = vcol[pos];
            }
            let v = &sb.eig.vectors;
            let x = v.matmul(&x_eig).matmul(&v.dagger());
            finish_stationary(g, &x)
        }
        dim => Err(Error::NonErgodic { kernel_dim: dim }),
    }
}

/// Unique stationary state of an ergodic generator.
///
/// Solved through the Hermitian trick (kernel of `𝓛†𝓛` by Hermitian
/// eigendecomposition), dense up to dimension 20 and blockwise in the Bohr
/// sectors above that. Kernel dimension is counted by direct residuals
/// `‖𝓛v‖₂ < 1e−9` across all candidates; a non-simple kernel is reported as
/// [`Error::NonErgodic`]. The returned state is Hermitized, clipped
/// (eigenvalues in `[−1e−10, 0)` → 0), normalized, and certified to satisfy
/// `‖𝓛ρ‖₁ ≤ 1e−9` against the original generator.
pub fn stationary_state(g: &GKLSGenerator) -> Result<DensityMatrix> {
    if g.dim() <= DENSE_DIM_LIMIT {
        stationary_dense(g)
    } else {
        stationary_blockwise(g)
    }
}

// ---------------------------------------------------------------------------
// Propagation.
// ---------------------------------------------------------------------------

fn propagate_dense(g: &GKLSGenerator, rho0: &DensityMatrix, t: f64) -> Result<ComplexMatrix> {
    let m = generator_superop(g)?;
    let e = SuperOperatorMatrix::from_matrix(expm(&m.matrix().scale_re(t))?)?;
    Ok(e.apply(rho0.matrix()))
}

fn propagate_blockwise(g: &GKLSGenerator, rho0: &DensityMatrix, t: f64) -> Result<ComplexMatrix> {
    let d = g.dim();
    let sb = build_secular_blocks(g)?;
    let v = &sb.eig.vectors;
    let vd = v.dagger();
    let rho_eig = vd.matmul(rho0.matrix()).matmul(v);
    let mut out_eig = ComplexMatrix::zeros(d, d);
    for block in &sb.blocks {
        let n = block.pairs.len();
        // Factor the fast common phase: exp(tM) = e^{−iω̄t}·exp(tM̃) with
        // M̃ = M + iω̄. The residual diagonal of M̃ is the tiny in-cluster
        // frequency scatter, so the matrix exponential only sees the slow
        // dissipative scales.
        let mut tilde = block.mat.clone();
        for p in 0..n {
            tilde[(p, p)] += C64::new(0.0, block.omega);
        }
        let e = expm(&tilde.scale_re(t))?;
        let phase = C64::from_polar(1.0, -block.omega * t);
        for (p, &(r, c)) in block.pairs.iter().enumerate() {
            let mut acc = ZERO;
            for (p2, &(r2, c2)) in block.pairs.iter().enumerate() {
                acc += e[(p, p2)] * rho_eig[(r2, c2)];
            }
            out_eig[(r, c)] = acc * phase;
        }
    }
    Ok(v.matmul(&out_eig).matmul(&vd))
}

/// Evolves `ρ₀` for time `t ≥ 0` under the semigroup `exp(t𝓛)`.
///
/// Dense matrix exponential up to dimension 20, secular-block exponentials
/// above. The result is Hermitized and its trace drift checked against
/// `1e−9` before clipping to a valid density matrix.
pub fn propagate(g: &GKLSGenerator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if g.dim() != rho0.dim() {
        return Err(Error::ShapeMismatch {
            context: "propagate",
            expected: format!("{0}x{0}", g.dim()),
            got: format!("{0}x{0}", rho0.dim()),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvariantViolation {
            what: format!("propagation time must be ≥ 0, got {t}"),
        });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let x = if g.dim() <= DENSE_DIM_LIMIT {
        propagate_dense(g, rho0, t)?
    } else {
        propagate_blockwise(g, rho0, t)?
    };
    let drift = (x.trace() - ONE).norm();
    if drift > TRACE_DRIFT_TOL {
        return Err(Error::NumericalFailure {
            what: format!("trace drifted by {drift:.3e} under propagation to t = {t}"),
        });
    }
    DensityMatrix::from_clipped(&x, CLIP_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sampling::{random_density, random_hermitian};
    use crate::linalg::{gibbs_state, trace_distance, vec as vec_op};
    use crate::operators::{BatteryParams, battery_hamiltonian};
    use crate::spectra::RateProfile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_level(e: f64) -> HermitianOperator {
        HermitianOperator::new(ComplexMatrix::diag_real(&[0.0, e])).unwrap()
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]])
    }

    fn lowering() -> ComplexMatrix {
        // |0⟩⟨1|
        ComplexMatrix::from_fn(2, 2, |r, c| {
            if r == 0 && c == 1 { ONE } else { ZERO }
        })
    }

    fn flat_thermal(rate: f64, temperature: f64) -> CouplingSpectrum {
        CouplingSpectrum::Thermal {
            profile: RateProfile::Flat { rate },
            temperature,
        }
    }

    #[test]
    fn bohr_two_level_sigma_x() {
        let h = two_level(1.3);
        let d = bohr_decompose(&h, &sigma_x(), 0.0).unwrap();
        let freqs: Vec<f64> = d.frequencies().collect();
        assert_eq!(freqs.len(), 2);
        assert!((freqs[0] + 1.3).abs() < 1e-12);
        assert!((freqs[1] - 1.3).abs() < 1e-12);
        let s_e = d.component(1.3, 1e-9).unwrap();
        assert!(s_e.max_abs_diff(&lowering()) < 1e-12);
    }

    #[test]
    fn bohr_reconstruction_and_conjugate_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(401);
        let h = random_hermitian(&mut rng, 6, 1.0);
        let s = random_hermitian(&mut rng, 6, 1.0).into_matrix();
        let d = bohr_decompose(&h, &s, 0.0).unwrap();

        let mut recon = ComplexMatrix::zeros(6, 6);
        for (_, m) in &d.terms {
            recon.axpy_re(1.0, m);
        }
        assert!(recon.max_abs_diff(&s) < 1e-11);

        for (omega, m) in &d.terms {
            let partner = d
                .component(-omega, 1e-9)
                .expect("Hermitian coupling must have mirrored components");
            assert!(partner.max_abs_diff(&m.dagger()) < 1e-11);
        }
    }

    /// Restricts `s` to the eigenstates of `h` below `e_cut`. The truncated
    /// oscillator reproduces the displaced ladder only in its low-energy
    /// corner (top-level eigenvalues are off by the truncation tail), so
    /// lattice assertions must not read frequencies sourced from those
    /// polluted levels.
    fn low_energy_restriction(
        h: &HermitianOperator,
        s: &ComplexMatrix,
        e_cut: f64,
    ) -> ComplexMatrix {
        let p = h
            .eig()
            .apply_function(|e| if e < e_cut { ONE } else { ZERO });
        p.matmul(s).matmul(&p)
    }

    #[test]
    fn bohr_battery_frequencies_sit_on_the_sideband_lattice() {
        // Incommensurate E_el/ω₀ so the two ladders don't alias; the
        // electronic lowering |0⟩⟨1| ⊗ I only connects the excited ladder
        // downward, so every frequency lies on the single signed lattice
        // E_el + m·ω₀.
        let params = BatteryParams {
            e_el: 0.77,
            omega0: 0.173,
            xi0: 0.8,
            fock_levels: 20,
            ..BatteryParams::default()
        };
        let h = battery_hamiltonian(&params).unwrap();
        let n = params.fock_levels;
        let lower = crate::operators::electronic_lowering().kron(&ComplexMatrix::identity(n));
        let s = low_energy_restriction(&h, &lower, params.e_el + 6.5 * params.omega0);
        let d = bohr_decompose(&h, &s, 0.0).unwrap();
        let mut m_seen = std::collections::HashSet::new();
        for omega in d.frequencies() {
            let m = (omega - params.e_el) / params.omega0;
            assert!(
                (m - m.round()).abs() < 1e-7,
                "Bohr frequency {omega} is off the E_el + m·ω₀ lattice"
            );
            m_seen.insert(m.round() as i64);
        }
        for m in -4..=4 {
            assert!(m_seen.contains(&m), "sideband m = {m} missing");
        }
        // Positive frequencies (the downhill channels) reach down to the
        // lowest sideband above zero and no further.
        let min_pos = d
            .frequencies()
            .filter(|w| *w > 0.0)
            .fold(f64::INFINITY, f64::min);
        assert!((min_pos - (params.e_el - 4.0 * params.omega0)).abs() < 1e-7);

        // The Hermitian coupling adds the mirrored components; with the
        // commensurate defaults (E_el = 10·ω₀) the positive-frequency set is
        // still exactly a subset of {E_el + m·ω₀}.
        let params = BatteryParams {
            xi0: 0.8,
            fock_levels: 20,
            ..BatteryParams::default()
        };
        let h = battery_hamiltonian(&params).unwrap();
        let sx = sigma_x().kron(&ComplexMatrix::identity(params.fock_levels));
        let s = low_energy_restriction(&h, &sx, params.e_el + 6.5 * params.omega0);
        let d = bohr_decompose(&h, &s, 0.0).unwrap();
        let mut m_seen = std::collections::HashSet::new();
        for omega in d.frequencies().filter(|w| *w > 0.0) {
            let m = (omega - params.e_el) / params.omega0;
            assert!(
                (m - m.round()).abs() < 1e-7,
                "positive Bohr frequency {omega} is off the E_el + m·ω₀ lattice"
            );
            m_seen.insert(m.round() as i64);
        }
        for m in -3..=3 {
            assert!(m_seen.contains(&m), "sideband m = {m} missing");
        }
    }

    #[test]
    fn bohr_components_reproduce_heisenberg_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(402);
        let h = random_hermitian(&mut rng, 8, 1.0);
        let s = random_hermitian(&mut rng, 8, 1.0).into_matrix();
        let d = bohr_decompose(&h, &s, 0.0).unwrap();

        let t = 2.3;
        let eig = h.eig();
        let u = eig.apply_function(|e| C64::from_polar(1.0, -e * t)); // e^{−iHt}
        let direct = u.dagger().matmul(&s).matmul(&u); // e^{iHt} S e^{−iHt}

        let mut summed = ComplexMatrix::zeros(8, 8);
        for (omega, m) in &d.terms {
            summed.axpy(C64::from_polar(1.0, -omega * t), m);
        }
        assert!(summed.max_abs_diff(&direct) < 1e-9);
    }

    #[test]
    fn assemble_two_level_thermal_gives_damping_pair() {
        let (e, temp, rate) = (1.0, 0.4, 0.8);
        let g = assemble_davies(
            &two_level(e),
            &[(
                CouplingOperator::Hermitian(sigma_x()),
                flat_thermal(rate, temp),
            )],
            0.0,
        )
        .unwrap();
        assert_eq!(g.channels().len(), 2);
        // Channels come out sorted by frequency: excitation first.
        let up = &g.channels()[0];
        let down = &g.channels()[1];
        assert!(down.1.max_abs_diff(&lowering()) < 1e-12);
        assert!((down.0 - rate).abs() < 1e-15);
        assert!((up.0 / down.0 - (-e / temp as f64).exp()).abs() < 1e-15);
        assert!(up.1.max_abs_diff(&lowering().dagger()) < 1e-12);
    }

    #[test]
    fn generator_annihilates_trace_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(403);
        let h = random_hermitian(&mut rng, 5, 1.0);
        let s = random_hermitian(&mut rng, 5, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.6, 0.7))],
            0.0,
        )
        .unwrap();
        for _ in 0..4 {
            let rho = random_density(&mut rng, 5);
            assert!(g.apply(rho.matrix()).trace().norm() < 1e-12);
        }
    }

    #[test]
    fn gibbs_state_is_stationary_for_thermal_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let temp = 0.7;
        let h = random_hermitian(&mut rng, 5, 1.0);
        let s = random_hermitian(&mut rng, 5, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(
                CouplingOperator::Hermitian(s),
                CouplingSpectrum::Thermal {
                    profile: RateProfile::OhmicGaussian {
                        coupling: 0.9,
                        cutoff: 2.5,
                    },
                    temperature: temp,
                },
            )],
            0.0,
        )
        .unwrap();
        let gibbs = gibbs_state(&h, 1.0 / temp).unwrap();
        assert!(trace_norm(&g.apply(gibbs.matrix())) <= 1e-10);
    }

    #[test]
    fn superop_matches_direct_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(405);
        let h = random_hermitian(&mut rng, 4, 1.0);
        let s = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.5, 0.9))],
            0.0,
        )
        .unwrap();
        let m = generator_superop(&g).unwrap();
        for _ in 0..3 {
            let rho = random_density(&mut rng, 4);
            let via_superop = m.apply(rho.matrix());
            let direct = g.apply(rho.matrix());
            assert!(via_superop.max_abs_diff(&direct) < 1e-12);
        }
    }

    #[test]
    fn superop_of_pure_hamiltonian_has_bohr_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(406);
        let h = random_hermitian(&mut rng, 4, 1.0);
        let g = GKLSGenerator::new(h.clone(), Vec::new()).unwrap();
        let m = generator_superop(&g).unwrap();
        let eig = h.eig();
        // Eigenoperators |v_k⟩⟨v_l| of the commutator map carry eigenvalue
        // −i(ε_k − ε_l).
        for (k, l) in [(0usize, 1usize), (2, 0), (3, 3)] {
            let vk: Vec<C64> = (0..4).map(|r| eig.vectors[(r, k)]).collect();
            let vl: Vec<C64> = (0..4).map(|r| eig.vectors[(r, l)]).collect();
            let outer = ComplexMatrix::from_fn(4, 4, |r, c| vk[r] * vl[c].conj());
            let expected = outer.scale(C64::new(0.0, -(eig.values[k] - eig.values[l])));
            assert!(m.apply(&outer).max_abs_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn superop_preserves_trace_as_left_null_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(407);
        let h = random_hermitian(&mut rng, 4, 1.0);
        let s = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.7, 0.5))],
            0.0,
        )
        .unwrap();
        let m = generator_superop(&g).unwrap();
        let id_vec = vec_op(&ComplexMatrix::identity(4));
        // vec(I)† 𝓛 = 0 row vector ⇔ 𝓛† vec(I) = 0.
        let y = m.matrix().dagger().matmul(&id_vec);
        assert!(y.max_abs() < 1e-12);
    }

    #[test]
    fn dissipator_commutes_with_hamiltonian_superoperator() {
        let mut rng = ChaCha8Rng::seed_from_u64(408);
        let h = random_hermitian(&mut rng, 5, 1.0);
        let s = random_hermitian(&mut rng, 5, 1.0).into_matrix();
        let full = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.8, 0.6))],
            0.0,
        )
        .unwrap();
        let ham_only = GKLSGenerator::new(h.clone(), Vec::new()).unwrap();
        let diss_only = GKLSGenerator::new(
            HermitianOperator::new(ComplexMatrix::zeros(5, 5)).unwrap(),
            full.channels().to_vec(),
        )
        .unwrap();
        let hs = generator_superop(&ham_only).unwrap();
        let ds = generator_superop(&diss_only).unwrap();
        let comm = hs.compose(&ds).sub(&ds.compose(&hs));
        let scale = hs.matrix().max_abs() * ds.matrix().max_abs() + 1.0;
        assert!(comm.matrix().max_abs() < 1e-9 * scale);
    }

    #[test]
    fn populations_decouple_from_coherences() {
        let mut rng = ChaCha8Rng::seed_from_u64(409);
        let h = random_hermitian(&mut rng, 5, 1.0);
        let s = random_hermitian(&mut rng, 5, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.7, 0.8))],
            0.0,
        )
        .unwrap();
        let eig = g.hamiltonian().eig();
        let v = &eig.vectors;
        let vd = v.dagger();
        let rho = random_density(&mut rng, 5);
        let rho_eig = vd.matmul(rho.matrix()).matmul(v);
        let diag_eig = ComplexMatrix::from_fn(5, 5, |r, c| {
            if r == c { rho_eig[(r, c)] } else { ZERO }
        });

        let l_full = vd.matmul(&g.apply(rho.matrix())).matmul(v);
        let diag_orig = v.matmul(&diag_eig).matmul(&vd);
        let l_diag = vd.matmul(&g.apply(&diag_orig)).matmul(v);
        for r in 0..5 {
            // Population flow is identical whether or not coherences ride along…
            assert!((l_full[(r, r)] - l_diag[(r, r)]).norm() < 1e-12);
            // …and a diagonal state generates no coherences.
            for c in 0..5 {
                if r != c {
                    assert!(l_diag[(r, c)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stationary_two_level_thermal_matches_gibbs_populations() {
        let (e, temp) = (1.0, 0.5);
        let g = assemble_davies(
            &two_level(e),
            &[(
                CouplingOperator::Hermitian(sigma_x()),
                flat_thermal(0.4, temp),
            )],
            0.0,
        )
        .unwrap();
        let rho = stationary_state(&g).unwrap();
        let z = 1.0 + (-e / temp as f64).exp();
        assert!((rho.matrix()[(0, 0)].re - 1.0 / z).abs() < 1e-10);
        assert!((rho.matrix()[(1, 1)].re - (-e / temp as f64).exp() / z).abs() < 1e-10);
        assert!(rho.matrix()[(0, 1)].norm() < 1e-10);
    }

    #[test]
    fn stationary_chemical_two_level_balances_at_shifted_exponent() {
        let (e, t1, dg) = (1.0, 0.25, 0.4);
        let g = assemble_davies(
            &two_level(e),
            &[(
                CouplingOperator::RotatingWave {
                    lowering: lowering(),
                },
                CouplingSpectrum::Chemical {
                    profile: RateProfile::Flat { rate: 0.3 },
                    t1,
                    delta_g: dg,
                },
            )],
            0.0,
        )
        .unwrap();
        let rho = stationary_state(&g).unwrap();
        let ratio = rho.matrix()[(1, 1)].re / rho.matrix()[(0, 0)].re;
        let expected = (-(e - dg) / t1 as f64).exp();
        assert!(
            (ratio - expected).abs() < 1e-10 * expected,
            "population ratio {ratio} vs {expected}"
        );
    }

    #[test]
    fn blockwise_stationary_agrees_with_dense_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(410);
        let h = random_hermitian(&mut rng, 6, 1.0);
        let s = random_hermitian(&mut rng, 6, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.5, 0.6))],
            0.0,
        )
        .unwrap();
        let dense = stationary_dense(&g).unwrap();
        let blockwise = stationary_blockwise(&g).unwrap();
        assert!(trace_distance(dense.matrix(), blockwise.matrix()) < 1e-9);
    }

    /// Vibrational-model generator large enough to force the blockwise path.
    fn battery_thermal_generator(ergodic: bool) -> GKLSGenerator {
        let params = BatteryParams {
            e_el: 0.77, // off the m·ω₀ lattice: keeps the spectrum non-degenerate
            omega0: 0.1,
            xi0: 0.9,
            fock_levels: 12,
            ..BatteryParams::default()
        };
        let h = battery_hamiltonian(&params).unwrap();
        let n = params.fock_levels;
        let a = params.annihilator_full();
        let position = &a + &a.dagger();
        let mut couplings = vec![(
            CouplingOperator::Hermitian(position),
            flat_thermal(0.02, 0.35),
        )];
        if ergodic {
            // The vibrational coupling never flips the electronic state, so a
            // second bath on σ_x ⊗ I is needed to connect the two branches.
            couplings.push((
                CouplingOperator::Hermitian(sigma_x().kron(&ComplexMatrix::identity(n))),
                flat_thermal(0.015, 0.35),
            ));
        }
        assemble_davies(&h, &couplings, 0.0).unwrap()
    }

    #[test]
    fn blockwise_stationary_of_two_bath_battery_is_gibbs() {
        let g = battery_thermal_generator(true);
        assert!(g.dim() > DENSE_DIM_LIMIT);
        let rho = stationary_state(&g).unwrap();
        let gibbs = gibbs_state(g.hamiltonian(), 1.0 / 0.35).unwrap();
        assert!(trace_distance(rho.matrix(), gibbs.matrix()) < 1e-8);
    }

    #[test]
    fn branch_conserving_generator_is_flagged_non_ergodic() {
        let g = battery_thermal_generator(false);
        match stationary_state(&g) {
            Err(Error::NonErgodic { kernel_dim }) => assert_eq!(kernel_dim, 2),
            other => panic!("expected NonErgodic, got {other:?}"),
        }
    }

    #[test]
    fn propagate_identity_at_zero_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(411);
        let g = assemble_davies(
            &two_level(1.0),
            &[(
                CouplingOperator::Hermitian(sigma_x()),
                flat_thermal(0.3, 0.5),
            )],
            0.0,
        )
        .unwrap();
        let rho0 = random_density(&mut rng, 2);
        let rho = propagate(&g, &rho0, 0.0).unwrap();
        assert_eq!(rho.matrix().max_abs_diff(rho0.matrix()), 0.0);
    }

    #[test]
    fn propagate_reaches_stationary_state() {
        let g = assemble_davies(
            &two_level(1.0),
            &[(
                CouplingOperator::Hermitian(sigma_x()),
                flat_thermal(0.8, 0.5),
            )],
            0.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(412);
        let rho0 = random_density(&mut rng, 2);
        let late = propagate(&g, &rho0, 60.0).unwrap();
        let stat = stationary_state(&g).unwrap();
        assert!(trace_distance(late.matrix(), stat.matrix()) < 1e-7);
    }

    #[test]
    fn propagation_is_a_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(413);
        let h = random_hermitian(&mut rng, 4, 1.0);
        let s = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.6, 0.7))],
            0.0,
        )
        .unwrap();
        let rho0 = random_density(&mut rng, 4);
        let (t1, t2) = (0.9, 1.7);
        let one_shot = propagate(&g, &rho0, t1 + t2).unwrap();
        let two_step = propagate(&g, &propagate(&g, &rho0, t1).unwrap(), t2).unwrap();
        assert!(one_shot.matrix().max_abs_diff(two_step.matrix()) < 1e-9);
    }

    #[test]
    fn blockwise_propagation_is_a_semigroup_too() {
        let g = battery_thermal_generator(true);
        let rho0 = DensityMatrix::maximally_mixed(g.dim());
        let (t1, t2) = (3.0, 8.0);
        let one_shot = propagate(&g, &rho0, t1 + t2).unwrap();
        let two_step = propagate(&g, &propagate(&g, &rho0, t1).unwrap(), t2).unwrap();
        assert!(one_shot.matrix().max_abs_diff(two_step.matrix()) < 1e-9);
    }

    #[test]
    fn blockwise_propagation_matches_dense_on_small_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(414);
        let h = random_hermitian(&mut rng, 5, 1.0);
        let s = random_hermitian(&mut rng, 5, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.4, 0.9))],
            0.0,
        )
        .unwrap();
        let rho0 = random_density(&mut rng, 5);
        let t = 0.7;
        let dense = propagate_dense(&g, &rho0, t).unwrap();
        let blockwise = propagate_blockwise(&g, &rho0, t).unwrap();
        assert!(dense.max_abs_diff(&blockwise) < 1e-11);
    }

    #[test]
    fn propagator_is_cptp_at_representative_times() {
        let mut rng = ChaCha8Rng::seed_from_u64(415);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let s = random_hermitian(&mut rng, 3, 1.0).into_matrix();
        let g = assemble_davies(
            &h,
            &[(CouplingOperator::Hermitian(s), flat_thermal(0.9, 0.4))],
            0.0,
        )
        .unwrap();
        let m = generator_superop(&g).unwrap();
        for factor in [0.1, 1.0, 10.0] {
            let t = factor / g.max_rate();
            let e = SuperOperatorMatrix::from_matrix(expm(&m.matrix().scale_re(t)).unwrap())
                .unwrap();
            assert!(e.is_cptp(1e-9), "not CPTP at t = {t}");
        }
    }

    #[test]
    fn assemble_rejects_invalid_spectra() {
        // Negative rate smuggled in through an unvalidated profile literal.
        let bad = CouplingSpectrum::Thermal {
            profile: RateProfile::Flat { rate: -1.0 },
            temperature: 0.5,
        };
        assert!(
            assemble_davies(
                &two_level(1.0),
                &[(CouplingOperator::Hermitian(sigma_x()), bad)],
                0.0
            )
            .is_err()
        );

        // Tabulated spectrum that does not cover the Bohr frequencies.
        let tab = crate::spectra::TabulatedSpectrum::new(vec![(-0.5, 0.1), (0.5, 0.1)]).unwrap();
        match assemble_davies(
            &two_level(2.0),
            &[(
                CouplingOperator::Hermitian(sigma_x()),
                CouplingSpectrum::Tabulated(tab),
            )],
            0.0,
        ) {
            Err(Error::Extrapolation { .. }) => {}
            other => panic!("expected extrapolation error, got {other:?}"),
        }
    }

    #[test]
    fn superop_dimension_cap_is_enforced() {
        let d = MAX_SUPEROP_DIM + 1;
        let h = HermitianOperator::new(ComplexMatrix::zeros(d, d)).unwrap();
        let g = GKLSGenerator::new(h, Vec::new()).unwrap();
        assert!(matches!(
            generator_superop(&g),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
