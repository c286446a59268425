//! Two-band fermionic exciton factory.
//!
//! Electrons in an upper band A and a lower band B (gap `E_g > 0`) relax
//! within each band through a cold bath at the ambient temperature `T`, while
//! a hot, possibly non-thermal bath (local temperature `T[ε]`, chemical free
//! energy `Δg` per reaction step) pumps interband transitions. All jump
//! channels conserve total electron number, so the exact stationary analysis
//! works per particle-number sector; the approximate description is a product
//! of grand-canonical ensembles at `T` with two electrochemical potentials
//! `μ_a, μ_b`, and the pump strength is summarized by the single parameter
//! `Δμ = μ_a − μ_b` obtained by minimizing the stationarity residual of that
//! ansatz.
//!
//! Scale limits: the dense Lindbladian machinery runs up to 8 modes
//! (dimension 256); the classical rate-equation reduction, which is exact for
//! the occupation-basis populations here, extends to 12 modes.

use crate::davies::GKLSGenerator;
use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, DensityMatrix, HermitianOperator};
use crate::operators::{Band, FermionRegister, MAX_DENSE_MODES, ModeLabel};

/// Mode-count cap for anything that materializes the 2ⁿ-dimensional
/// Lindbladian (superoperator memory).
pub const MAX_FACTORY_MODES: usize = 8;

/// Numerically stable Fermi function `1/(e^x + 1)`.
fn fermi(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

// ---------------------------------------------------------------------------
// Parameters.
// ---------------------------------------------------------------------------

/// Energy-resolved temperature `T[ε]` of the hot bath, held as a
/// piecewise-linear table over ε and clamped to the end values outside the
/// tabulated range. A photon-population parametrization `n(ω)` converts to
/// this form through the Bose occupation formula but is not stored directly.
#[derive(Clone, Debug)]
pub struct HotTemperature {
    samples: Vec<(f64, f64)>,
}

impl HotTemperature {
    pub fn constant(temperature: f64) -> Self {
        Self {
            samples: vec![(0.0, temperature)],
        }
    }

    pub fn from_table(samples: Vec<(f64, f64)>) -> Self {
        Self { samples }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Config("hot-temperature table is empty".into()));
        }
        for (eps, t) in &self.samples {
            if !eps.is_finite() || !t.is_finite() {
                return Err(Error::Config(
                    "hot-temperature table contains non-finite entries".into(),
                ));
            }
            if *t <= 0.0 {
                return Err(Error::Config(format!(
                    "hot temperature must be > 0, got {t} at ε = {eps}"
                )));
            }
        }
        for w in self.samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(
                    "hot-temperature energies must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// `T[ε]`, clamped linear interpolation.
    pub fn eval(&self, eps: f64) -> f64 {
        let s = &self.samples;
        let n = s.len();
        if eps <= s[0].0 {
            return s[0].1;
        }
        if eps >= s[n - 1].0 {
            return s[n - 1].1;
        }
        let hi = s.partition_point(|(e, _)| *e <= eps).clamp(1, n - 1);
        let (e0, t0) = s[hi - 1];
        let (e1, t1) = s[hi];
        let x = (eps - e0) / (e1 - e0);
        t0 * (1.0 - x) + t1 * x
    }
}

/// Full parameter set of the factory.
///
/// Band energies must be listed in ascending order — that order defines the
/// mode indices the rate matrices refer to (modes 0..n_a are band A, the rest
/// band B). `gamma_a[k][k']` is read for pairs with `E_a(k) ≥ E_a(k')` (the
/// downward direction); likewise `gamma_b`. `gamma_inter[k][ℓ]` couples A-mode
/// k to B-mode ℓ. Equal-index intraband entries are pure-dephasing channels.
#[derive(Clone, Debug)]
pub struct ExcitonFactoryParams {
    pub band_a: Vec<f64>,
    pub band_b: Vec<f64>,
    pub gamma_a: Vec<Vec<f64>>,
    pub gamma_b: Vec<Vec<f64>>,
    pub gamma_inter: Vec<Vec<f64>>,
    pub temperature: f64,
    pub hot_temperature: HotTemperature,
    pub delta_g: f64,
}

fn check_rate_matrix(name: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch {
            context: "exciton rate matrix",
            expected: format!("{name}: {rows}×{cols}"),
            got: format!(
                "{}×{}",
                m.len(),
                m.first().map(|r| r.len()).unwrap_or(0)
            ),
        });
    }
    for row in m {
        for &r in row {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Config(format!(
                    "{name} rates must be finite and ≥ 0, got {r}"
                )));
            }
        }
    }
    Ok(())
}

impl ExcitonFactoryParams {
    pub fn validate(&self) -> Result<()> {
        let (na, nb) = (self.band_a.len(), self.band_b.len());
        if na == 0 || nb == 0 {
            return Err(Error::Config("both bands need at least one mode".into()));
        }
        for band in [&self.band_a, &self.band_b] {
            if band.iter().any(|e| !e.is_finite()) {
                return Err(Error::Config("band energies must be finite".into()));
            }
            if band.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Config(
                    "band energies must be listed in ascending order \
                     (rate-matrix indices follow that order)"
                        .into(),
                ));
            }
        }
        let gap = self.gap();
        if !(gap > 0.0) {
            return Err(Error::Config(format!(
                "band gap min E_a − max E_b must be > 0, got {gap}"
            )));
        }
        check_rate_matrix("gamma_a", &self.gamma_a, na, na)?;
        check_rate_matrix("gamma_b", &self.gamma_b, nb, nb)?;
        check_rate_matrix("gamma_inter", &self.gamma_inter, na, nb)?;
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "ambient temperature must be finite and > 0, got {}",
                self.temperature
            )));
        }
        if !self.delta_g.is_finite() {
            return Err(Error::Config("delta_g must be finite".into()));
        }
        self.hot_temperature.validate()
    }

    pub fn n_modes(&self) -> usize {
        self.band_a.len() + self.band_b.len()
    }

    /// `E_g = min E_a − max E_b` (bands are stored ascending).
    pub fn gap(&self) -> f64 {
        self.band_a[0] - self.band_b[self.band_b.len() - 1]
    }

    /// Transition energy `ε_{kℓ} = E_a(k) − E_b(ℓ)`.
    pub fn epsilon(&self, k: usize, l: usize) -> f64 {
        self.band_a[k] - self.band_b[l]
    }

    /// Canonical mode register: band A first, then band B, ascending energy
    /// within each — identical to the index convention of the rate matrices.
    pub fn register(&self) -> Result<FermionRegister> {
        let mut labels = Vec::with_capacity(self.n_modes());
        for &e in &self.band_a {
            labels.push(ModeLabel { band: Band::A, energy: e });
        }
        for &e in &self.band_b {
            labels.push(ModeLabel { band: Band::B, energy: e });
        }
        FermionRegister::new(labels)
    }

    fn mode_energies(&self) -> Vec<f64> {
        self.band_a.iter().chain(self.band_b.iter()).copied().collect()
    }
}

/// Product of grand-canonical ensembles at a common temperature with separate
/// electrochemical potentials for the two bands.
#[derive(Clone, Copy, Debug)]
pub struct GrandCanonicalAnsatz {
    pub mu_a: f64,
    pub mu_b: f64,
    pub temperature: f64,
}

impl GrandCanonicalAnsatz {
    pub fn delta_mu(&self) -> f64 {
        self.mu_a - self.mu_b
    }

    /// Fermi–Dirac occupation of a mode at energy `e` in the given band.
    pub fn occupation(&self, band: Band, e: f64) -> f64 {
        let mu = match band {
            Band::A => self.mu_a,
            Band::B => self.mu_b,
        };
        fermi((e - mu) / self.temperature)
    }
}

// ---------------------------------------------------------------------------
// Jump channels.
//
// Every channel is a quadratic monomial in the mode operators, so it maps
// each occupation basis state to at most one other basis state (with sign
// ±1). That single fact powers both the dense construction and the classical
// rate-equation reduction.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
enum JumpKind {
    /// `c_ann c_cre†` (apply the creator first) — the downward transfers.
    CreateThenAnnihilate { cre: usize, ann: usize },
    /// `c_cre† c_ann` — the Boltzmann-suppressed upward transfers.
    AnnihilateThenCreate { ann: usize, cre: usize },
}

impl JumpKind {
    fn apply(&self, reg: &FermionRegister, source: usize) -> Option<(usize, f64)> {
        match *self {
            JumpKind::CreateThenAnnihilate { cre, ann } => {
                let (mid, s1) = reg.create(cre, source)?;
                let (out, s2) = reg.annihilate(ann, mid)?;
                Some((out, s1 * s2))
            }
            JumpKind::AnnihilateThenCreate { ann, cre } => {
                let (mid, s1) = reg.annihilate(ann, source)?;
                let (out, s2) = reg.create(cre, mid)?;
                Some((out, s1 * s2))
            }
        }
    }

    fn dense(&self, reg: &FermionRegister) -> ComplexMatrix {
        let dim = reg.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for s in 0..dim {
            if let Some((t, sign)) = self.apply(reg, s) {
                m[(t, s)] = C64::new(sign, 0.0);
            }
        }
        m
    }
}

/// Intraband channels of one band: for every ordered pair with
/// `E(i) − E(j) ≥ 0`, a downward jump `c_i c_j†` at the bare rate and an
/// upward jump `c_i† c_j` suppressed by `e^{−(E(i)−E(j))/T}`.
fn push_intraband(
    energies: &[f64],
    rates: &[Vec<f64>],
    offset: usize,
    temperature: f64,
    out: &mut Vec<(f64, JumpKind)>,
) {
    for i in 0..energies.len() {
        for j in 0..energies.len() {
            let de = energies[i] - energies[j];
            if de < 0.0 {
                continue;
            }
            let rate = rates[i][j];
            if rate == 0.0 {
                continue;
            }
            out.push((
                rate,
                JumpKind::CreateThenAnnihilate { cre: offset + j, ann: offset + i },
            ));
            out.push((
                rate * (-de / temperature).exp(),
                JumpKind::AnnihilateThenCreate { ann: offset + j, cre: offset + i },
            ));
        }
    }
}

/// Interband channels: recombination `a_k b_ℓ†` at `γ_{kℓ}` and pumping
/// `a_k† b_ℓ` at `γ_{kℓ}·e^{−(ε_{kℓ}−Δg)/T[ε_{kℓ}]}`.
fn push_interband(p: &ExcitonFactoryParams, out: &mut Vec<(f64, JumpKind)>) -> Result<()> {
    let na = p.band_a.len();
    for k in 0..na {
        for l in 0..p.band_b.len() {
            let eps = p.epsilon(k, l);
            if eps < 0.0 {
                continue;
            }
            let rate = p.gamma_inter[k][l];
            if rate == 0.0 {
                continue;
            }
            let t_hot = p.hot_temperature.eval(eps);
            let up = rate * (-(eps - p.delta_g) / t_hot).exp();
            if !up.is_finite() {
                return Err(Error::Config(format!(
                    "interband pump factor overflows for ε = {eps}, Δg = {}, T[ε] = {t_hot}",
                    p.delta_g
                )));
            }
            out.push((rate, JumpKind::CreateThenAnnihilate { cre: na + l, ann: k }));
            out.push((up, JumpKind::AnnihilateThenCreate { ann: na + l, cre: k }));
        }
    }
    Ok(())
}

fn all_jumps(p: &ExcitonFactoryParams) -> Result<Vec<(f64, JumpKind)>> {
    let mut out = Vec::new();
    push_intraband(&p.band_a, &p.gamma_a, 0, p.temperature, &mut out);
    push_intraband(
        &p.band_b,
        &p.gamma_b,
        p.band_a.len(),
        p.temperature,
        &mut out,
    );
    push_interband(p, &mut out)?;
    Ok(out)
}

fn dense_channels(
    reg: &FermionRegister,
    jumps: &[(f64, JumpKind)],
) -> Vec<(f64, ComplexMatrix)> {
    jumps.iter().map(|(rate, j)| (*rate, j.dense(reg))).collect()
}

fn free_hamiltonian(p: &ExcitonFactoryParams, reg: &FermionRegister) -> HermitianOperator {
    let energies = p.mode_energies();
    let dim = reg.dim();
    let diag: Vec<f64> = (0..dim)
        .map(|s| {
            energies
                .iter()
                .enumerate()
                .filter(|(i, _)| s & (1 << i) != 0)
                .map(|(_, e)| e)
                .sum()
        })
        .collect();
    HermitianOperator::new_unchecked(ComplexMatrix::diag_real(&diag))
}

/// Full factory Lindbladian on the 2ⁿ fermionic Fock space.
pub fn build_factory_generator(p: &ExcitonFactoryParams) -> Result<GKLSGenerator> {
    p.validate()?;
    let n = p.n_modes();
    if n > MAX_FACTORY_MODES {
        return Err(Error::ResourceLimit {
            what: format!(
                "dense factory generator limited to {MAX_FACTORY_MODES} modes, got {n}"
            ),
        });
    }
    let reg = p.register()?;
    let h = free_hamiltonian(p, &reg);
    let jumps = all_jumps(p)?;
    GKLSGenerator::new(h, dense_channels(&reg, &jumps))
}

/// Interband-only dissipator (no Hamiltonian part) — the piece whose action
/// on the grand-canonical ansatz measures its non-stationarity.
fn interband_generator(p: &ExcitonFactoryParams) -> Result<GKLSGenerator> {
    let reg = p.register()?;
    let mut jumps = Vec::new();
    push_interband(p, &mut jumps)?;
    let dim = reg.dim();
    let zero = HermitianOperator::new_unchecked(ComplexMatrix::zeros(dim, dim));
    GKLSGenerator::new(zero, dense_channels(&reg, &jumps))
}

// ---------------------------------------------------------------------------
// Classical rate-equation reduction.
//
// Since every jump maps basis states to basis states and the Hamiltonian is
// diagonal, the occupation populations obey a closed Pauli master equation
// dp/dt = Q p with Q[s'][s] = Σ_channels rate·|⟨s'|L|s⟩|² (s' ≠ s) and
// columns summing to zero. This is exact, not an approximation — but reading
// the stationary *state* off the stationary *distribution* needs coherences
// to die out, which degenerate single-particle energies can prevent. Hence
// the refusal below.
// ---------------------------------------------------------------------------

/// Pauli master equation over occupation strings, `dp/dt = Q p`.
#[derive(Clone, Debug)]
pub struct ClassicalChain {
    rates: Vec<Vec<f64>>,
    n_modes: usize,
}

pub fn classical_reduction(p: &ExcitonFactoryParams) -> Result<ClassicalChain> {
    p.validate()?;
    let n = p.n_modes();
    if n > MAX_DENSE_MODES {
        return Err(Error::ResourceLimit {
            what: format!(
                "classical reduction limited to {MAX_DENSE_MODES} modes, got {n}"
            ),
        });
    }
    for (name, band) in [("A", &p.band_a), ("B", &p.band_b)] {
        let spread = band[band.len() - 1] - band[0];
        let tol = 1e-12 * spread.abs().max(1.0);
        if band.windows(2).any(|w| w[1] - w[0] <= tol) {
            return Err(Error::InvariantViolation {
                what: format!(
                    "band {name} has (near-)degenerate single-particle energies; \
                     coherences may mix into the populations, so the classical \
                     reduction is refused"
                ),
            });
        }
    }

    let reg = p.register()?;
    let dim = reg.dim();
    let mut rates = vec![vec![0.0f64; dim]; dim];
    for (rate, jump) in all_jumps(p)? {
        for s in 0..dim {
            if let Some((t, sign)) = jump.apply(&reg, s) {
                if t != s {
                    rates[t][s] += rate * sign * sign;
                }
            }
        }
    }
    for s in 0..dim {
        let col_sum: f64 = (0..dim).filter(|&t| t != s).map(|t| rates[t][s]).sum();
        rates[s][s] = -col_sum;
    }
    Ok(ClassicalChain { rates, n_modes: n })
}

impl ClassicalChain {
    pub fn dim(&self) -> usize {
        1 << self.n_modes
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `Q[s'][s]`: column-generator convention, `dp/dt = Q p`.
    pub fn rate_matrix(&self) -> &[Vec<f64>] {
        &self.rates
    }

    /// Stationary distribution restricted to the `N`-electron sector (every
    /// channel conserves total number, so each sector carries its own chain).
    /// Returns a full-length probability vector, zero outside the sector.
    pub fn stationary_in_sector(&self, electrons: usize) -> Result<Vec<f64>> {
        let dim = self.dim();
        let members: Vec<usize> = (0..dim)
            .filter(|s| s.count_ones() as usize == electrons)
            .collect();
        if members.is_empty() {
            return Err(Error::Config(format!(
                "no {electrons}-electron states among {} modes",
                self.n_modes
            )));
        }
        let m = members.len();
        // Confinement check: columns must not leak probability out of the
        // sector (they cannot, by construction, but this is what the solve
        // below silently relies on).
        let scale = self
            .rates
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        for &s in &members {
            let inside: f64 = members.iter().map(|&t| self.rates[t][s]).sum();
            if inside.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::InvariantViolation {
                    what: format!(
                        "chain leaks {inside:.3e} probability flux out of the \
                         {electrons}-electron sector"
                    ),
                });
            }
        }

        // Q p = 0 with Σp = 1: replace the last equation by the normalization
        // row and solve the dense system by Gaussian elimination.
        let mut a = vec![vec![0.0f64; m]; m];
        for (ri, &t) in members.iter().enumerate() {
            for (ci, &s) in members.iter().enumerate() {
                a[ri][ci] = self.rates[t][s];
            }
        }
        for v in a[m - 1].iter_mut() {
            *v = 1.0;
        }
        let mut rhs = vec![0.0f64; m];
        rhs[m - 1] = 1.0;
        let p = solve_real(&mut a, &mut rhs)?;

        // Certify: generator residual and positivity.
        for (ri, &t) in members.iter().enumerate() {
            if ri == m - 1 {
                continue;
            }
            let res: f64 = members
                .iter()
                .enumerate()
                .map(|(ci, &s)| self.rates[t][s] * p[ci])
                .sum();
            let _ = t;
            if res.abs() > 1e-9 * scale.max(1.0) {
                return Err(Error::NumericalFailure {
                    what: format!("chain stationary solve residual {res:.3e}"),
                });
            }
        }
        let mut full = vec![0.0f64; dim];
        let mut total = 0.0;
        for (ci, &s) in members.iter().enumerate() {
            if p[ci] < -1e-12 {
                return Err(Error::NumericalFailure {
                    what: format!("chain stationary distribution has weight {:.3e}", p[ci]),
                });
            }
            full[s] = p[ci].max(0.0);
            total += full[s];
        }
        for v in &mut full {
            *v /= total;
        }
        Ok(full)
    }
}

/// In-place Gaussian elimination with partial pivoting; returns the solution
/// of `a x = rhs`.
fn solve_real(a: &mut [Vec<f64>], rhs: &mut [f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let (pivot, max) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if max == 0.0 {
            return Err(Error::NumericalFailure {
                what: "singular rate matrix in chain stationary solve".into(),
            });
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Grand-canonical ansatz and the Δμ optimization.
// ---------------------------------------------------------------------------

/// The product Fermi–Dirac state `ρ̄[μ_a, μ_b]` on the mode register of `p`.
pub fn grand_canonical_state(
    ansatz: &GrandCanonicalAnsatz,
    p: &ExcitonFactoryParams,
) -> Result<DensityMatrix> {
    p.validate()?;
    let n = p.n_modes();
    if n > MAX_FACTORY_MODES {
        return Err(Error::ResourceLimit {
            what: format!(
                "dense ansatz state limited to {MAX_FACTORY_MODES} modes, got {n}"
            ),
        });
    }
    let reg = p.register()?;
    let occ: Vec<f64> = reg
        .labels()
        .iter()
        .map(|l| ansatz.occupation(l.band, l.energy))
        .collect();
    let dim = reg.dim();
    let mut diag = vec![0.0f64; dim];
    let mut total = 0.0;
    for (s, d) in diag.iter_mut().enumerate() {
        let mut w = 1.0;
        for (i, f) in occ.iter().enumerate() {
            w *= if s & (1 << i) != 0 { *f } else { 1.0 - *f };
        }
        *d = w;
        total += w;
    }
    for d in &mut diag {
        *d /= total;
    }
    DensityMatrix::new(ComplexMatrix::diag_real(&diag))
}

/// Single-mode occupations `⟨n_i⟩` in the register's canonical order.
pub fn mode_occupations(rho: &DensityMatrix, reg: &FermionRegister) -> Vec<f64> {
    let dim = reg.dim();
    let mat = rho.matrix();
    (0..reg.n_modes())
        .map(|i| {
            (0..dim)
                .filter(|s| s & (1 << i) != 0)
                .map(|s| mat[(s, s)].re)
                .sum()
        })
        .collect()
}

/// Exponents of the per-pair balance factors:
/// `X = (ε − Δμ)/T` against `Y = (ε − Δg)/T[ε]`.
fn balance_exponents(
    p: &ExcitonFactoryParams,
    ansatz: &GrandCanonicalAnsatz,
    k: usize,
    l: usize,
) -> (f64, f64) {
    let eps = p.epsilon(k, l);
    let x = (eps - ansatz.delta_mu()) / ansatz.temperature;
    let y = (eps - p.delta_g) / p.hot_temperature.eval(eps);
    (x, y)
}

/// Stationarity defect of the ansatz under the interband dissipator.
///
/// `exact` is `‖𝓛^inter ρ̄‖₁` by direct matrix application; `bound` is the
/// per-pair estimate
/// `Σ γ_{kℓ}|1−e^{X−Y}|·[e^{−X}(1−f_a)f_b + f_a(1−f_b)]`,
/// which dominates the exact value (triangle inequality over pairs; equality
/// for a single pair).
pub fn interband_residual(
    ansatz: &GrandCanonicalAnsatz,
    p: &ExcitonFactoryParams,
) -> Result<(f64, f64)> {
    p.validate()?;
    let n = p.n_modes();
    if n > MAX_FACTORY_MODES {
        return Err(Error::ResourceLimit {
            what: format!("interband residual limited to {MAX_FACTORY_MODES} modes, got {n}"),
        });
    }
    let rho = grand_canonical_state(ansatz, p)?;
    let gen = interband_generator(p)?;
    let exact = crate::linalg::trace_norm(&gen.apply(rho.matrix()));

    let mut bound = 0.0;
    for k in 0..p.band_a.len() {
        for l in 0..p.band_b.len() {
            let rate = p.gamma_inter[k][l];
            if rate == 0.0 || p.epsilon(k, l) < 0.0 {
                continue;
            }
            let (x, y) = balance_exponents(p, ansatz, k, l);
            let fa = ansatz.occupation(Band::A, p.band_a[k]);
            let fb = ansatz.occupation(Band::B, p.band_b[l]);
            // e^{−X}−e^{−Y} and 1−e^{X−Y} via exp_m1 for accuracy near X = Y.
            let creation = ((y - x).exp_m1() * (-y).exp()).abs() * (1.0 - fa) * fb;
            let recombination = (x - y).exp_m1().abs() * fa * (1.0 - fb);
            bound += rate * (creation + recombination);
        }
    }
    Ok((exact, bound))
}

/// Fixes `μ_b` for a given `Δμ` by bisecting the mean total electron number
/// of the ansatz onto half filling, `⟨N⟩ = n/2`.
pub fn solve_mu_b(p: &ExcitonFactoryParams, delta_mu: f64) -> Result<f64> {
    p.validate()?;
    if !delta_mu.is_finite() {
        return Err(Error::Config("delta_mu must be finite".into()));
    }
    let target = p.n_modes() as f64 / 2.0;
    let t = p.temperature;
    let filling = |mu_b: f64| -> f64 {
        let mu_a = mu_b + delta_mu;
        p.band_a.iter().map(|&e| fermi((e - mu_a) / t)).sum::<f64>()
            + p.band_b.iter().map(|&e| fermi((e - mu_b) / t)).sum::<f64>()
    };
    let e_min = p.band_b[0].min(p.band_a[0]);
    let e_max = p.band_a[p.band_a.len() - 1].max(p.band_b[p.band_b.len() - 1]);
    let pad = 60.0 * t + delta_mu.abs() + 1.0;
    let (mut lo, mut hi) = (e_min - pad, e_max + pad);
    if !(filling(lo) < target && filling(hi) > target) {
        return Err(Error::NumericalFailure {
            what: "half-filling bisection bracket failed".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if filling(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn residual_at(p: &ExcitonFactoryParams, delta_mu: f64) -> Result<f64> {
    let mu_b = solve_mu_b(p, delta_mu)?;
    let ansatz = GrandCanonicalAnsatz {
        mu_a: mu_b + delta_mu,
        mu_b,
        temperature: p.temperature,
    };
    Ok(interband_residual(&ansatz, p)?.0)
}

/// Minimizes the exact interband residual over `Δμ`: coarse scan over the
/// supplied grid, then golden-section refinement between the neighbors of the
/// best grid point. At every candidate `Δμ`, `μ_b` is re-fixed to half
/// filling.
pub fn optimal_delta_mu(p: &ExcitonFactoryParams, grid: &[f64]) -> Result<f64> {
    p.validate()?;
    if grid.len() < 3 {
        return Err(Error::Config(
            "delta_mu grid needs at least three points".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(
            "delta_mu grid must be strictly increasing".into(),
        ));
    }
    let mut best = (0usize, f64::INFINITY);
    for (i, &dmu) in grid.iter().enumerate() {
        let r = residual_at(p, dmu)?;
        if r < best.1 {
            best = (i, r);
        }
    }
    if best.0 == 0 || best.0 == grid.len() - 1 {
        return Err(Error::Config(format!(
            "residual minimizer sits at the grid edge (Δμ = {}); widen the grid",
            grid[best.0]
        )));
    }

    // Golden-section search on the bracketing interval.
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (grid[best.0 - 1], grid[best.0 + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = residual_at(p, c)?;
    let mut fd = residual_at(p, d)?;
    while b - a > 1e-8 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = residual_at(p, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = residual_at(p, d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Residual-weighted mean transition energy: which `ε_{kℓ}` the interband
/// coupling actually exercises at the ansatz. The weights are the occupation
/// parts of the residual bound (the `|1−e^{X−Y}|` factor is left out so the
/// estimate stays finite at the optimum, where every balance factor
/// vanishes); with all-zero weights a rate-weighted mean is used.
pub fn effective_gap(ansatz: &GrandCanonicalAnsatz, p: &ExcitonFactoryParams) -> Result<f64> {
    p.validate()?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut rate_num = 0.0;
    let mut rate_den = 0.0;
    for k in 0..p.band_a.len() {
        for l in 0..p.band_b.len() {
            let rate = p.gamma_inter[k][l];
            let eps = p.epsilon(k, l);
            if rate == 0.0 || eps < 0.0 {
                continue;
            }
            let (x, _) = balance_exponents(p, ansatz, k, l);
            let fa = ansatz.occupation(Band::A, p.band_a[k]);
            let fb = ansatz.occupation(Band::B, p.band_b[l]);
            let w = rate * ((-x).exp() * (1.0 - fa) * fb + fa * (1.0 - fb));
            num += w * eps;
            den += w;
            rate_num += rate * eps;
            rate_den += rate;
        }
    }
    if den > 0.0 {
        Ok(num / den)
    } else if rate_den > 0.0 {
        Ok(rate_num / rate_den)
    } else {
        Err(Error::Config(
            "no active interband pairs to estimate the effective gap from".into(),
        ))
    }
}

/// Closed-form pump strength: `Δμ = (1 − T/T_hot)·Ē_g + (T/T_hot)·Δg`.
/// In the isothermal limit the whole reaction free energy survives
/// (`Δμ = Δg`); at `T → 0` the full effective gap does.
pub fn predicted_delta_mu(e_g_eff: f64, t: f64, t_hot: f64, delta_g: f64) -> f64 {
    let ratio = t / t_hot;
    (1.0 - ratio) * e_g_eff + ratio * delta_g
}

// ---------------------------------------------------------------------------
// Fermi–Dirac diagnostics for exact stationary states.
// ---------------------------------------------------------------------------

/// Least-squares Fermi–Dirac fit of a set of single-mode occupations: one
/// shared temperature, one chemical potential per band.
#[derive(Clone, Copy, Debug)]
pub struct FermiDiracFit {
    pub mu_a: f64,
    pub mu_b: f64,
    pub temperature: f64,
    /// Root-mean-square misfit in logit space.
    pub residual: f64,
}

/// Fits `(energy, occupation)` points of the two bands to
/// `n = 1/(e^{(E−μ_band)/T}+1)`, linear in logit space. Needs occupations
/// strictly inside (0, 1) and at least one band with two distinct energies.
pub fn fermi_dirac_fit(
    band_a: &[(f64, f64)],
    band_b: &[(f64, f64)],
) -> Result<FermiDiracFit> {
    let logit = |pts: &[(f64, f64)]| -> Result<Vec<(f64, f64)>> {
        pts.iter()
            .map(|&(e, n)| {
                if !(n > 0.0 && n < 1.0) {
                    return Err(Error::Config(format!(
                        "occupation {n} at energy {e} is outside (0, 1); cannot fit"
                    )));
                }
                Ok((e, (n / (1.0 - n)).ln()))
            })
            .collect()
    };
    let a = logit(band_a)?;
    let b = logit(band_b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("both bands need at least one point".into()));
    }

    // Model: y = μ_band/T − E/T. With per-band intercepts, the common slope
    // −1/T comes from pooled within-band covariances.
    let stats = |pts: &[(f64, f64)]| -> (f64, f64, f64, f64) {
        let n = pts.len() as f64;
        let me = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov = pts.iter().map(|p| (p.0 - me) * (p.1 - my)).sum::<f64>();
        let ss = pts.iter().map(|p| (p.0 - me) * (p.0 - me)).sum::<f64>();
        (me, my, cov, ss)
    };
    let (mea, mya, cova, ssa) = stats(&a);
    let (meb, myb, covb, ssb) = stats(&b);
    if ssa + ssb <= 0.0 {
        return Err(Error::Config(
            "all energies coincide within each band; slope is undetermined".into(),
        ));
    }
    let slope = (cova + covb) / (ssa + ssb); // = −1/T
    if !(slope < 0.0) {
        return Err(Error::NumericalFailure {
            what: format!(
                "fitted slope {slope:.3e} is not negative; occupations are not \
                 Fermi–Dirac ordered"
            ),
        });
    }
    let t = -1.0 / slope;
    let mu_a = t * (mya - slope * mea);
    let mu_b = t * (myb - slope * meb);

    let mut sq = 0.0;
    for (e, y) in a.iter() {
        let r = y - (mu_a / t + slope * e);
        sq += r * r;
    }
    for (e, y) in b.iter() {
        let r = y - (mu_b / t + slope * e);
        sq += r * r;
    }
    let residual = (sq / (a.len() + b.len()) as f64).sqrt();
    Ok(FermiDiracFit { mu_a, mu_b, temperature: t, residual })
}
