//! Concrete operator constructions: truncated boson ladders, Weyl
//! displacements, the electronic two-level system, the battery Hamiltonian
//! with its polaron transform, and Jordan–Wigner fermion modes.
//!
//! Tensor convention, fixed project-wide: electronic factor first, oscillator
//! second, so a product operator is `elec.kron(&osc)` and a composite index is
//! `e * N + n` for electronic level `e` and oscillator level `n`.

use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, HermitianOperator, ONE, expm};

/// Truncated oscillator Hilbert space with levels |0⟩ … |N−1⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockSpace {
    n_levels: usize,
}

impl FockSpace {
    pub fn new(n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::Config(format!(
                "Fock truncation must keep at least 2 levels, got {n_levels}"
            )));
        }
        Ok(Self { n_levels })
    }

    pub fn dim(&self) -> usize {
        self.n_levels
    }
}

/// Truncated annihilation operator: ⟨n−1|A|n⟩ = √n.
pub fn boson_annihilator(space: FockSpace) -> ComplexMatrix {
    let n = space.dim();
    let mut a = ComplexMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// A†A, exact in the truncated space.
pub fn number_operator(space: FockSpace) -> ComplexMatrix {
    ComplexMatrix::diag_real(&(0..space.dim()).map(|k| k as f64).collect::<Vec<_>>())
}

/// Weyl displacement W(α) = exp(αA† − ᾱA), computed through the matrix
/// exponential of the (exactly anti-Hermitian) truncated generator. This is
/// unitary to machine precision at any truncation; only its action on states
/// near the truncation edge deviates from the infinite-dimensional operator.
pub fn weyl(alpha: C64, space: FockSpace) -> ComplexMatrix {
    let n = space.dim();
    if alpha.norm_sqr() > n as f64 / 4.0 {
        eprintln!(
            "warning: weyl displacement |alpha|^2 = {:.3} is large for {} Fock levels; \
             truncation error may be significant",
            alpha.norm_sqr(),
            n
        );
    }
    let a = boson_annihilator(space);
    let mut gen = a.dagger().scale(alpha);
    gen.axpy(-alpha.conj(), &a);
    expm(&gen).expect("Weyl generator is square")
}

/// |0⟩⟨0| on the electronic two-level factor (index 0 = ground).
pub fn ground_projector() -> ComplexMatrix {
    ComplexMatrix::diag_real(&[1.0, 0.0])
}

/// |1⟩⟨1| on the electronic two-level factor (index 1 = excited).
pub fn excited_projector() -> ComplexMatrix {
    ComplexMatrix::diag_real(&[0.0, 1.0])
}

/// Electronic lowering operator |0⟩⟨1|.
pub fn electronic_lowering() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 1)] = ONE;
    m
}

/// Parameters of the two-level + reaction-coordinate battery.
///
/// Energies are in the same (ℏ = k_B = 1) unit system throughout; `xi0` is
/// the dimensionless displacement, so the Huang–Rhys factor is ξ₀².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryParams {
    /// Oscillator quantum ω₀.
    pub omega0: f64,
    /// Dimensionless displacement of the excited-state potential minimum.
    pub xi0: f64,
    /// Electronic excitation energy E_el.
    pub e_el: f64,
    /// Ambient temperature (k_B T).
    pub temperature: f64,
    /// Effective chemical potential Δμ imprinted by the exciton reservoir.
    pub delta_mu: f64,
    /// Fock truncation N.
    pub fock_levels: usize,
    /// Oscillator damping rate γ = G₁(ω₀).
    pub gamma: f64,
    /// Zero-frequency thermal spectrum G₁(0) (enters pure dephasing).
    pub g1_at_zero: f64,
    /// Zero-frequency dephasing-bath spectrum G₂(0).
    pub g2_at_zero: f64,
    /// Overall scale of the excitonic coupling spectrum.
    pub gamma_ex: f64,
}

impl Default for BatteryParams {
    /// Representative scales: E_el ≈ Δμ ≈ 1, ω₀ = 0.1, T = 0.01, with weak
    /// dissipative rates well below ω₀.
    fn default() -> Self {
        Self {
            omega0: 0.1,
            xi0: 1.0,
            e_el: 1.0,
            temperature: 0.01,
            delta_mu: 1.0,
            fock_levels: 40,
            gamma: 1e-2,
            g1_at_zero: 1e-2,
            g2_at_zero: 1e-2,
            gamma_ex: 1e-3,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::Config(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if self.fock_levels < 2 {
            return Err(Error::Config(format!(
                "fock_levels must be >= 2, got {}",
                self.fock_levels
            )));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("g1_at_zero", self.g1_at_zero),
            ("g2_at_zero", self.g2_at_zero),
            ("gamma_ex", self.gamma_ex),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.xi0.is_finite() || !self.e_el.is_finite() || !self.delta_mu.is_finite() {
            return Err(Error::Config("xi0, e_el, delta_mu must be finite".into()));
        }
        Ok(())
    }

    /// Huang–Rhys factor S = ξ₀².
    pub fn huang_rhys(&self) -> f64 {
        self.xi0 * self.xi0
    }

    pub fn fock(&self) -> FockSpace {
        FockSpace { n_levels: self.fock_levels }
    }

    /// Dimension of the full C² ⊗ Fock(N) space.
    pub fn dim(&self) -> usize {
        2 * self.fock_levels
    }

    /// A on the full space: I₂ ⊗ A.
    pub fn annihilator_full(&self) -> ComplexMatrix {
        ComplexMatrix::identity(2).kron(&boson_annihilator(self.fock()))
    }

    /// |1⟩⟨1| ⊗ I on the full space.
    pub fn excited_projector_full(&self) -> ComplexMatrix {
        excited_projector().kron(&ComplexMatrix::identity(self.fock_levels))
    }

    /// Displaced mode B = A − ξ₀|1⟩⟨1| on the full space.
    pub fn displaced_annihilator(&self) -> ComplexMatrix {
        let mut b = self.annihilator_full();
        b.axpy_re(-self.xi0, &self.excited_projector_full());
        b
    }
}

/// H_m = ω₀(A† − ξ₀|1⟩⟨1|)(A − ξ₀|1⟩⟨1|) + E_el|1⟩⟨1| on C² ⊗ Fock(N).
///
/// Spectrum (up to truncation): two interleaved ladders, {mω₀} on the ground
/// branch and {E_el + mω₀} on the displaced excited branch.
pub fn battery_hamiltonian(p: &BatteryParams) -> Result<HermitianOperator> {
    p.validate()?;
    let b = p.displaced_annihilator();
    let mut h = b.dagger().matmul(&b).scale_re(p.omega0);
    h.axpy_re(p.e_el, &p.excited_projector_full());
    HermitianOperator::new(h.hermitize())
}

/// Polaron transform U = e^{ξ₀(A†−A)|1⟩⟨1|}: identity on the ground branch,
/// W(ξ₀) on the excited branch. Exactly unitary in the truncated space.
pub fn polaron_transform(p: &BatteryParams) -> Result<ComplexMatrix> {
    p.validate()?;
    let w = weyl(C64::new(p.xi0, 0.0), p.fock());
    let id = ComplexMatrix::identity(p.fock_levels);
    let mut u = ground_projector().kron(&id);
    u.axpy(ONE, &excited_projector().kron(&w));
    Ok(u)
}

/// Which single-particle band a fermionic mode belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Band {
    A,
    B,
}

/// A single fermionic mode: band membership plus single-particle energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeLabel {
    pub band: Band,
    pub energy: f64,
}

/// An ordered register of fermionic modes.
///
/// The stored order is canonical — band A first by ascending energy, then
/// band B by ascending energy — and defines both the Jordan–Wigner string
/// order and the bit layout of basis states (bit i of the basis index is the
/// occupation of mode i).
#[derive(Clone, Debug, PartialEq)]
pub struct FermionRegister {
    labels: Vec<ModeLabel>,
}

/// Largest register that may be materialized as dense matrices (dim 4096).
pub const MAX_DENSE_MODES: usize = 12;

impl FermionRegister {
    pub fn new(mut labels: Vec<ModeLabel>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("fermion register needs at least one mode".into()));
        }
        if labels.iter().any(|l| !l.energy.is_finite()) {
            return Err(Error::Config("fermion mode energies must be finite".into()));
        }
        labels.sort_by(|x, y| {
            x.band.cmp(&y.band).then(x.energy.partial_cmp(&y.energy).unwrap())
        });
        Ok(Self { labels })
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.labels.len()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    /// Indices (into the canonical order) of the modes in the given band.
    pub fn band_modes(&self, band: Band) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i].band == band).collect()
    }

    /// Matrix element ⟨target|c_i|source⟩ of the annihilator of mode i,
    /// without materializing any matrix: returns (target index, sign) when
    /// mode i is occupied in `source`, else None.
    pub fn annihilate(&self, mode: usize, source: usize) -> Option<(usize, f64)> {
        debug_assert!(mode < self.labels.len());
        if source & (1 << mode) == 0 {
            return None;
        }
        let parity = (source & ((1 << mode) - 1)).count_ones();
        let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
        Some((source & !(1 << mode), sign))
    }

    /// Matrix element action of the creator c_i† (see [`Self::annihilate`]).
    pub fn create(&self, mode: usize, source: usize) -> Option<(usize, f64)> {
        debug_assert!(mode < self.labels.len());
        if source & (1 << mode) != 0 {
            return None;
        }
        let parity = (source & ((1 << mode) - 1)).count_ones();
        let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
        Some((source | (1 << mode), sign))
    }
}

/// Dense Jordan–Wigner mode operators: one (annihilator, creator) pair per
/// mode, in the register's canonical order. The construction makes all
/// anticommutation relations hold exactly (the signs are ±1, the entries 0/±1).
pub fn fermion_mode_ops(reg: &FermionRegister) -> Result<Vec<(ComplexMatrix, ComplexMatrix)>> {
    let n = reg.n_modes();
    if n > MAX_DENSE_MODES {
        return Err(Error::ResourceLimit {
            what: format!(
                "dense fermion operators limited to {MAX_DENSE_MODES} modes, got {n}"
            ),
        });
    }
    let dim = reg.dim();
    let mut out = Vec::with_capacity(n);
    for mode in 0..n {
        let mut ann = ComplexMatrix::zeros(dim, dim);
        for source in 0..dim {
            if let Some((target, sign)) = reg.annihilate(mode, source) {
                ann[(target, source)] = C64::new(sign, 0.0);
            }
        }
        let cre = ann.dagger();
        out.push((ann, cre));
    }
    Ok(out)
}
