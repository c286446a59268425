//! Single-cell electro-vibrational battery: a two-level electronic system
//! whose excited state displaces a reaction-coordinate oscillator, kept in
//! thermal contact with an ambient bath and charged (or discharged) through
//! an excitonic reservoir that exchanges electronic quanta one at a time.
//!
//! # Frame convention
//!
//! Every matrix in this module is expressed in the *dressed* (polaron) basis
//! `{|e⟩ ⊗ |n⟩_e}`, where the oscillator number states of the excited branch
//! are counted from the displaced minimum. In this basis the cell Hamiltonian
//! is exactly diagonal,
//!
//! ```text
//! H = ω₀ (I ⊗ A†A) + E_el (|1⟩⟨1| ⊗ I),
//! ```
//!
//! the dissipative reaction-coordinate channel is exactly the bare lowering
//! operator `I ⊗ A`, and the electronic coupling resolves into sideband
//! operators `V_m = |0⟩⟨1| ⊗ w_m`, where `w_m` is the m-th diagonal stripe of
//! the displacement operator `W(ξ₀)` (the stripe that raises the oscillator
//! by `m` quanta). Each of these is a single exact Bohr component of the
//! diagonal Hamiltonian, so the secular block machinery in [`crate::davies`]
//! applies without truncation artefacts: a Fock cutoff at `N` levels clips
//! state tails but never distorts the ladder algebra. Working instead with
//! the lab-frame channel `A − ξ₀|1⟩⟨1|` would scatter weight across spurious
//! edge frequencies at any finite `N`.
//!
//! The two descriptions are unitarily related by
//! [`crate::operators::polaron_transform`]; electronic populations, trace
//! distances, transition rates, entropies and ergotropy are all invariant
//! under it. Use [`to_lab_frame`] when bare-basis oscillator statistics are
//! needed.
//!
//! # Conventions
//!
//! `ħ = k_B = 1`; composite index `e·N + n` (electronic ⊗ oscillator);
//! a sideband with index `m` releases energy `E_el − m·ω₀` into the
//! excitonic reservoir when the cell discharges.

use crate::davies::GKLSGenerator;
use crate::error::{Error, Result};
use crate::linalg::{C64, ComplexMatrix, DensityMatrix, HermitianOperator};
use crate::operators::{BatteryParams, electronic_lowering, ground_projector, polaron_transform};
use crate::spectra::{CouplingSpectrum, RateProfile};

/// Sidebands whose squared Frobenius weight falls below this fraction of the
/// largest stripe are dropped from the electronic generators.
pub const STRIPE_CUTOFF_REL: f64 = 1e-14;

/// Largest tolerable state weight outside the representable band
/// (oscillator levels above `N−1` plus stripe indices above `N−2`).
pub const TRUNCATION_TAIL_LIMIT: f64 = 1e-10;

/// Relative mismatch allowed between a spectrum's own upward rates and the
/// detailed-balance law the generator builders assume.
const BALANCE_CHECK_TOL: f64 = 1e-6;

/// `e^{−x/t}`, with the `t = 0` limit taken for `x > 0`.
fn boltzmann_factor(x: f64, t: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if t == 0.0 {
        if x > 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        (-x / t).exp()
    }
}

/// Geometric occupation weights of the ambient-temperature oscillator,
/// normalized within the truncated ladder.
pub fn thermal_occupations(p: &BatteryParams) -> Vec<f64> {
    let q = boltzmann_factor(p.omega0, p.temperature);
    let mut w = Vec::with_capacity(p.fock_levels);
    let mut x = 1.0;
    for _ in 0..p.fock_levels {
        w.push(x);
        x *= q;
    }
    let norm: f64 = w.iter().sum();
    for v in &mut w {
        *v /= norm;
    }
    w
}

/// `N × N` thermal state of the reaction coordinate at the ambient
/// temperature.
pub fn oscillator_thermal(p: &BatteryParams) -> ComplexMatrix {
    ComplexMatrix::diag_real(&thermal_occupations(p))
}

/// Cell Hamiltonian in the dressed basis: two rigid `ω₀` ladders offset by
/// the electronic gap.
pub fn dressed_hamiltonian(p: &BatteryParams) -> Result<HermitianOperator> {
    let n = p.fock_levels;
    let mut energies = Vec::with_capacity(2 * n);
    for e in 0..2 {
        for k in 0..n {
            energies.push(p.omega0 * k as f64 + p.e_el * e as f64);
        }
    }
    HermitianOperator::new(ComplexMatrix::diag_real(&energies))
}

/// Gibbs state of the oscillator conditioned on the electronic level:
/// `|level⟩⟨level| ⊗ thermal`. In the dressed basis both branches share the
/// same bare thermal factor; the excited branch picks up its displacement
/// only on conversion to the lab frame.
pub fn conditioned_gibbs(p: &BatteryParams, level: usize) -> Result<DensityMatrix> {
    truncation_guard(p)?;
    if level > 1 {
        return Err(Error::Config(format!(
            "electronic level must be 0 or 1, got {level}"
        )));
    }
    let n = p.fock_levels;
    let th = thermal_occupations(p);
    let mut diag = vec![0.0; 2 * n];
    diag[level * n..(level + 1) * n].copy_from_slice(&th);
    DensityMatrix::new(ComplexMatrix::diag_real(&diag))
}

/// Excited-branch weight of the charged steady state,
/// `p₁ = [1 + e^{(E_el − Δμ)/T}]⁻¹`, with the `T = 0` limit handled exactly.
pub fn excited_weight(p: &BatteryParams) -> f64 {
    let gap = p.e_el - p.delta_mu;
    if p.temperature == 0.0 {
        return if gap > 0.0 {
            0.0
        } else if gap < 0.0 {
            1.0
        } else {
            0.5
        };
    }
    let x = gap / p.temperature;
    // Two-branch form, stable for |x| large in either direction.
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Steady state of the charged cell: the two conditioned Gibbs branches
/// weighted by the bias factor `e^{−(E_el − Δμ)/T}`.
pub fn analytic_stationary(p: &BatteryParams) -> Result<DensityMatrix> {
    truncation_guard(p)?;
    let n = p.fock_levels;
    let th = thermal_occupations(p);
    let p1 = excited_weight(p);
    let mut diag = vec![0.0; 2 * n];
    for k in 0..n {
        diag[k] = (1.0 - p1) * th[k];
        diag[n + k] = p1 * th[k];
    }
    DensityMatrix::new(ComplexMatrix::diag_real(&diag))
}

/// Verifies that the Fock cutoff can represent the states and sidebands this
/// module manipulates.
///
/// The computed tail is exact: the thermal weight that the truncated ladder
/// cannot hold (`q^N`) plus the displaced-state weight that falls outside the
/// retained stripe band `|m| ≤ N−2` — per oscillator column `n`, the infinite
/// displacement operator carries unit column norm, so `1 − Σ_m |w_m[·,n]|²`
/// over representable stripes is precisely the mass lost at this truncation.
pub fn truncation_guard(p: &BatteryParams) -> Result<()> {
    let tail = truncation_tail(p)?;
    if !(tail <= TRUNCATION_TAIL_LIMIT) {
        return Err(Error::TruncationTail {
            tail,
            limit: TRUNCATION_TAIL_LIMIT,
        });
    }
    Ok(())
}

/// The probability mass the truncation loses: thermal weight beyond level
/// N, plus displaced-sideband weight the stripes push past the cut.
pub fn truncation_tail(p: &BatteryParams) -> Result<f64> {
    p.validate()?;
    let n = p.fock_levels;
    let q = boltzmann_factor(p.omega0, p.temperature);
    let th = thermal_occupations(p);
    let mut col_mass = vec![0.0; n];
    let max_m = n as i64 - 2;
    for m in -max_m..=max_m {
        let stripe = weyl_stripe(p, m);
        for col in 0..n {
            for row in 0..n {
                let v = stripe.data()[row * n + col].re;
                col_mass[col] += v * v;
            }
        }
    }
    let mut tail = q.powi(n as i32);
    for (w, c) in th.iter().zip(&col_mass) {
        tail += w * (1.0 - c).max(0.0);
    }
    Ok(tail)
}

/// Pure-dephasing rate of the electronic coherence, `Γ = 4ξ₀²G₁(0) + G₂(0)`:
/// the zero-frequency reaction-coordinate noise picked up via the
/// displacement, plus direct electronic white noise.
pub fn decoherence_rate(p: &BatteryParams) -> f64 {
    4.0 * p.huang_rhys() * p.g1_at_zero + p.g2_at_zero
}

/// Ambient part of the cell generator: coherent evolution, thermal damping
/// and pumping of the reaction coordinate, and pure electronic dephasing.
///
/// In the dressed basis the damping channel is the bare lowering operator
/// `I ⊗ A` — the representation of the displaced-mode annihilator — so the
/// conditioned Gibbs branches, and every mixture of them, are stationary to
/// machine precision at any truncation.
pub fn thermal_rc_generator(p: &BatteryParams) -> Result<GKLSGenerator> {
    truncation_guard(p)?;
    let h = dressed_hamiltonian(p)?;
    let a = p.annihilator_full();
    let q = boltzmann_factor(p.omega0, p.temperature);
    let channels = vec![
        (p.gamma, a.clone()),
        (p.gamma * q, a.dagger()),
        (decoherence_rate(p), p.excited_projector_full()),
    ];
    GKLSGenerator::new(h, channels)
}

/// Transition energy released by sideband `m` during discharge:
/// `E_el − m·ω₀`.
pub fn sideband_frequency(p: &BatteryParams, m: i64) -> f64 {
    p.e_el - m as f64 * p.omega0
}

/// The m-th diagonal stripe of the displacement operator `W(ξ₀)`: entries
/// `⟨n+m|W(ξ₀)|n⟩`, everything else zero.
///
/// In the number basis the displacement matrix elements are Franck–Condon
/// amplitudes,
///
/// ```text
/// ⟨n+m|W(ξ)|n⟩ = e^{−S/2} ξ^m √(n!/(n+m)!) L_n^{(m)}(S),   S = ξ², m ≥ 0,
/// ```
///
/// evaluated through the three-term Laguerre recurrence in `n`, with the
/// square-root prefactor downdated alongside so nothing large is ever
/// formed. (The textbook power series over `(A†)^{k+m} A^k` is exact in
/// real arithmetic but cancels catastrophically in floating point once
/// `S·n` is large — its terms peak exponentially above the O(1) result.)
/// Entries agree with the infinite-dimensional operator: truncation clips
/// the stripe band but cannot distort retained elements. Negative stripes
/// follow from transposition, `W(ξ)ᵀ = W(−ξ)`.
fn weyl_stripe(p: &BatteryParams, m: i64) -> ComplexMatrix {
    if m < 0 {
        return positive_stripe(p.fock_levels, (-m) as usize, -p.xi0).transpose();
    }
    positive_stripe(p.fock_levels, m as usize, p.xi0)
}

fn positive_stripe(n: usize, m: usize, xi: f64) -> ComplexMatrix {
    let s = xi * xi;
    let mut out = ComplexMatrix::zeros(n, n);
    if m >= n {
        return out;
    }
    // pref(col) = e^{−S/2} ξ^m √(col!/(col+m)!)
    let mut pref = (-0.5 * s).exp();
    for j in 1..=m {
        pref *= xi / (j as f64).sqrt();
    }
    let mut l_prev = 0.0;
    let mut l = 1.0; // L_0^{(m)}(S)
    for col in 0..(n - m) {
        out.data_mut()[(col + m) * n + col] = C64::new(pref * l, 0.0);
        let cf = col as f64;
        let mf = m as f64;
        let l_next = ((2.0 * cf + mf + 1.0 - s) * l - (cf + mf) * l_prev) / (cf + 1.0);
        l_prev = l;
        l = l_next;
        pref *= ((cf + 1.0) / (cf + mf + 1.0)).sqrt();
    }
    out
}

/// One sideband of the electronic coupling: `V_m = |0⟩⟨1| ⊗ w_m`, the exact
/// Bohr component of the dressed de-excitation operator `|0⟩⟨1| ⊗ W(ξ₀)` at
/// transition frequency `E_el − m·ω₀`.
#[derive(Clone, Debug)]
pub struct VmOperator {
    m: i64,
    matrix: ComplexMatrix,
}

impl VmOperator {
    pub fn m(&self) -> i64 {
        self.m
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Energy this sideband releases on de-excitation.
    pub fn frequency(&self, p: &BatteryParams) -> f64 {
        sideband_frequency(p, self.m)
    }
}

/// Builds the sideband operator for index `m`; refuses indices the truncated
/// ladder cannot carry (`|m| > N−2`).
pub fn vm_operator(m: i64, p: &BatteryParams) -> Result<VmOperator> {
    p.validate()?;
    let max_m = p.fock_levels as i64 - 2;
    if m.abs() > max_m {
        return Err(Error::Config(format!(
            "sideband index {m} outside the representable band |m| ≤ {max_m} \
             at {} oscillator levels; raise fock_levels",
            p.fock_levels
        )));
    }
    Ok(VmOperator {
        m,
        matrix: electronic_lowering().kron(&weyl_stripe(p, m)),
    })
}

/// Checks a spectrum pair `(G(|ν|), G(−|ν|))` against the detailed-balance
/// law `G(−ω) = e^{−(ω − shift)/T} G(ω)` declared for `ω > 0`.
///
/// Tabulated spectra are taken at face value (no law is declared with the
/// table), and microscopic two-band spectra satisfy the law on their own
/// support by construction; both are exempt. The check exists to catch a
/// spectrum wired to the wrong port — a plain thermal bath fed into the
/// biased charging contact, or vice versa.
fn check_balance(
    spec: &CouplingSpectrum,
    nu: f64,
    down: f64,
    up: f64,
    shift: f64,
    t: f64,
) -> Result<()> {
    if matches!(
        spec,
        CouplingSpectrum::Tabulated(_) | CouplingSpectrum::Excitonic(_)
    ) {
        return Ok(());
    }
    // Orient to the law's frame: `hi` is the value on the positive-frequency
    // side, `lo` the suppressed negative side, whichever transition
    // direction each one rates.
    let (hi, lo) = if nu >= 0.0 { (down, up) } else { (up, down) };
    let abs_nu = nu.abs();
    let violation = |expected: f64| {
        Err(Error::InvariantViolation {
            what: format!(
                "spectrum breaks detailed balance at ω = {abs_nu:.6}: value \
                 {lo:.6e} on the suppressed side, the balance law at shift \
                 {shift} requires {expected:.6e}"
            ),
        })
    };
    if t == 0.0 {
        // Zero temperature: no weight on the suppressed side above the
        // shift point (below it the law diverges and nothing is checkable).
        if abs_nu > shift && lo != 0.0 {
            return violation(0.0);
        }
        return Ok(());
    }
    let expected = hi * boltzmann_factor(abs_nu - shift, t);
    if !expected.is_finite() {
        return Ok(());
    }
    let scale = expected.max(lo);
    if scale > 0.0 && (lo - expected).abs() > BALANCE_CHECK_TOL * scale {
        return violation(expected);
    }
    Ok(())
}

/// Sideband channels of the electronic coupling under a reservoir spectrum
/// whose balance law sits at chemical shift `shift`.
fn electronic_channels(
    p: &BatteryParams,
    spec: &CouplingSpectrum,
    shift: f64,
) -> Result<Vec<(f64, ComplexMatrix)>> {
    spec.validate()?;
    let n = p.fock_levels;
    let max_m = n as i64 - 2;
    let lower = electronic_lowering();

    let mut stripes = Vec::new();
    let mut max_fro2 = 0.0f64;
    for m in -max_m..=max_m {
        let stripe = weyl_stripe(p, m);
        let fro2 = stripe.frobenius_norm().powi(2);
        max_fro2 = max_fro2.max(fro2);
        stripes.push((m, stripe, fro2));
    }

    let mut channels = Vec::new();
    for (m, stripe, fro2) in stripes {
        if fro2 <= STRIPE_CUTOFF_REL * max_fro2 {
            continue;
        }
        let nu = sideband_frequency(p, m);
        let down = spec.eval(nu)?;
        let up = if nu == 0.0 {
            // Resonant sideband (gap an exact multiple of ω₀): ±0 coincide,
            // so a sampled spectrum cannot carry the two reaction directions
            // separately. Supply the declared law's limit from ω → 0⁺ to
            // preserve the chemical grading.
            let balance = boltzmann_factor(-shift, p.temperature);
            if down == 0.0 {
                0.0
            } else if balance.is_finite() {
                down * balance
            } else {
                return Err(Error::InvariantViolation {
                    what: format!(
                        "zero-frequency sideband carries weight {down:.3e} but the \
                         balance law diverges at T = 0 under shift {shift}"
                    ),
                });
            }
        } else {
            spec.eval(-nu)?
        };
        check_balance(spec, nu, down, up, shift, p.temperature)?;
        if down > 0.0 || up > 0.0 {
            let jump = lower.kron(&stripe);
            if up > 0.0 {
                channels.push((up, jump.dagger()));
            }
            if down > 0.0 {
                channels.push((down, jump));
            }
        }
    }
    if channels.is_empty() {
        eprintln!(
            "warning: reservoir spectrum carries no weight on any retained \
             sideband; the electronic generator is empty"
        );
    }
    Ok(channels)
}

/// Charging generator: the electronic coupling dressed into sidebands, with
/// rates drawn from an excitonic reservoir spectrum held at chemical bias
/// `Δμ`. The spectrum must obey the biased balance law
/// `G(−ω) = e^{−(ω − Δμ)/T} G(ω)`; declared-law spectra are verified against
/// it on every retained sideband.
///
/// The generator is purely dissipative (zero Hamiltonian part); combine it
/// with [`thermal_rc_generator`] through [`BatteryGenerator`].
pub fn charging_generator(p: &BatteryParams, spec: &CouplingSpectrum) -> Result<GKLSGenerator> {
    truncation_guard(p)?;
    let channels = electronic_channels(p, spec, p.delta_mu)?;
    let d = 2 * p.fock_levels;
    GKLSGenerator::new(
        HermitianOperator::new(ComplexMatrix::zeros(d, d))?,
        channels,
    )
}

/// Discharge generator: identical sideband structure, but the reservoir is a
/// plain thermal environment at the ambient temperature (balance law with no
/// chemical shift).
pub fn discharge_generator(p: &BatteryParams, spec: &CouplingSpectrum) -> Result<GKLSGenerator> {
    truncation_guard(p)?;
    let channels = electronic_channels(p, spec, 0.0)?;
    let d = 2 * p.fock_levels;
    GKLSGenerator::new(
        HermitianOperator::new(ComplexMatrix::zeros(d, d))?,
        channels,
    )
}

/// The full cell generator, split into its ambient and excitonic parts.
/// Both parts are individually trace-annihilating; their sum is the total
/// generator returned by [`BatteryGenerator::total`].
#[derive(Clone, Debug)]
pub struct BatteryGenerator {
    pub thermal_rc: GKLSGenerator,
    pub decoherence_rate: f64,
    pub electronic: GKLSGenerator,
}

impl BatteryGenerator {
    /// Ambient contact plus a charging reservoir at bias `Δμ`.
    pub fn charging(p: &BatteryParams, spec: &CouplingSpectrum) -> Result<Self> {
        Ok(Self {
            thermal_rc: thermal_rc_generator(p)?,
            decoherence_rate: decoherence_rate(p),
            electronic: charging_generator(p, spec)?,
        })
    }

    /// Ambient contact plus a thermal discharge reservoir.
    pub fn discharging(p: &BatteryParams, spec: &CouplingSpectrum) -> Result<Self> {
        Ok(Self {
            thermal_rc: thermal_rc_generator(p)?,
            decoherence_rate: decoherence_rate(p),
            electronic: discharge_generator(p, spec)?,
        })
    }

    /// Single generator carrying the Hamiltonian of the ambient part and the
    /// channels of both parts.
    pub fn total(&self) -> Result<GKLSGenerator> {
        let mut channels: Vec<(f64, ComplexMatrix)> = self.thermal_rc.channels().to_vec();
        channels.extend(self.electronic.channels().iter().cloned());
        GKLSGenerator::new(self.thermal_rc.hamiltonian().clone(), channels)
    }

    /// Action of the summed generator.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.thermal_rc.apply(rho);
        out.axpy_re(1.0, &self.electronic.apply(rho));
        out
    }
}

/// Ground-branch drain rate of the charged cell, computed four ways.
#[derive(Clone, Copy, Debug)]
pub struct DischargeRate {
    /// `Tr[(|0⟩⟨0| ⊗ I) · 𝓛_exc ρ⁽¹⁾]` with the assembled generator.
    pub direct: f64,
    /// Scalar sideband sum `Σ_m G(E_el − mω₀) · ⟨w_m† w_m⟩_thermal`.
    pub closed_form: f64,
    /// Zero-temperature Poisson form `Σ_{m≥0} G(E_el − mω₀) e^{−S} S^m/m!`.
    pub poisson_zero_t: f64,
    /// Saddle-point sample `G(E_el − S·ω₀)`.
    pub asymptotic: f64,
}

/// Evaluates the discharge rate of the fully charged branch against a
/// thermal reservoir spectrum.
///
/// `direct` exercises the assembled channel matrices; `closed_form` walks
/// the same sidebands with purely scalar weights, so agreement between the
/// two validates the generator wiring rather than repeating it.
pub fn discharge_rate(p: &BatteryParams, spec: &CouplingSpectrum) -> Result<DischargeRate> {
    let gen = discharge_generator(p, spec)?;
    let rho1 = conditioned_gibbs(p, 1)?;
    let n = p.fock_levels;

    let moved = gen.apply(rho1.matrix());
    let mut direct = 0.0;
    for k in 0..n {
        direct += moved.data()[k * 2 * n + k].re;
    }

    let th = thermal_occupations(p);
    let max_m = n as i64 - 2;
    let mut closed_form = 0.0;
    for m in -max_m..=max_m {
        let stripe = weyl_stripe(p, m);
        let mut weight = 0.0;
        for col in 0..n {
            let mut col_sq = 0.0;
            for row in 0..n {
                let v = stripe.data()[row * n + col].re;
                col_sq += v * v;
            }
            weight += th[col] * col_sq;
        }
        if weight == 0.0 {
            continue;
        }
        closed_form += spec.eval(sideband_frequency(p, m))? * weight;
    }

    let s = p.huang_rhys();
    let mut poisson = (-s).exp();
    let mut poisson_zero_t = 0.0;
    for m in 0..=max_m {
        poisson_zero_t += spec.eval(sideband_frequency(p, m))? * poisson;
        poisson *= s / (m + 1) as f64;
    }

    let asymptotic = spec.eval(p.e_el - s * p.omega0)?;

    Ok(DischargeRate {
        direct,
        closed_form,
        poisson_zero_t,
        asymptotic,
    })
}

/// Rotates a dressed-basis state into the lab (bare oscillator) basis.
pub fn to_lab_frame(p: &BatteryParams, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let u = polaron_transform(p)?;
    DensityMatrix::new(u.matmul(rho.matrix()).matmul(&u.dagger()).hermitize())
}

/// Default charging reservoir: a Gaussian excitonic line at the electronic
/// gap, narrower than the sideband spacing so individual sidebands stay
/// spectrally resolved, with the biased balance law at `(T, Δμ)` built in.
///
/// The narrow line also keeps the upward rates bounded when `Δμ ≥ E_el`:
/// with a broad profile, sidebands far below the bias acquire
/// `e^{(Δμ−ω)/T}`-enhanced rates that dwarf every other scale in the
/// generator and defeat double-precision kernel extraction.
pub fn canonical_charging_spectrum(p: &BatteryParams) -> CouplingSpectrum {
    CouplingSpectrum::Chemical {
        profile: RateProfile::Gaussian {
            peak_rate: p.gamma_ex,
            center: p.e_el,
            width: 0.2 * p.omega0,
        },
        t1: p.temperature,
        delta_g: p.delta_mu,
    }
}

/// Default discharge reservoir: an Ohmic bath with a Gaussian cutoff above
/// the electronic gap, at the ambient temperature.
pub fn canonical_discharge_spectrum(p: &BatteryParams) -> CouplingSpectrum {
    CouplingSpectrum::Thermal {
        profile: RateProfile::OhmicGaussian {
            coupling: p.gamma_ex / p.e_el,
            cutoff: 3.0 * p.e_el,
        },
        temperature: p.temperature,
    }
}

/// Projector onto the ground electronic branch, `|0⟩⟨0| ⊗ I`.
pub fn ground_projector_full(p: &BatteryParams) -> ComplexMatrix {
    ground_projector().kron(&ComplexMatrix::identity(p.fock_levels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::davies::{bohr_decompose, generator_superop, propagate, stationary_state};
    use crate::linalg::{SuperOperatorMatrix, expm, partial_trace, trace_distance, trace_norm};
    use crate::operators::{BatteryParams, FockSpace, boson_annihilator, weyl};
    use crate::spectra::TabulatedSpectrum;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for v in m.data_mut() {
            *v = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        let g = m.matmul(&m.dagger());
        let tr = g.trace().re;
        DensityMatrix::new(g.scale_re(1.0 / tr)).unwrap()
    }

    fn mixture(p: &BatteryParams, p1: f64) -> DensityMatrix {
        let r0 = conditioned_gibbs(p, 0).unwrap();
        let r1 = conditioned_gibbs(p, 1).unwrap();
        let mut m = r0.matrix().scale_re(1.0 - p1);
        m.axpy_re(p1, r1.matrix());
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn truncation_guard_accepts_defaults_and_rejects_fat_tails() {
        let p = BatteryParams::default();
        truncation_guard(&p).unwrap();

        // A hot oscillator in a short ladder: thermal weight spills past N.
        let hot = BatteryParams {
            fock_levels: 12,
            temperature: 0.25,
            xi0: 0.0,
            ..BatteryParams::default()
        };
        match truncation_guard(&hot) {
            Err(Error::TruncationTail { tail, .. }) => assert!(tail > 1e-10),
            other => panic!("expected truncation refusal, got {other:?}"),
        }

        // A strongly displaced state in a short ladder: stripe weight
        // escapes the representable band even at zero temperature.
        let wide = BatteryParams {
            fock_levels: 10,
            temperature: 0.0,
            xi0: 2.5,
            ..BatteryParams::default()
        };
        assert!(matches!(
            truncation_guard(&wide),
            Err(Error::TruncationTail { .. })
        ));
    }

    #[test]
    fn thermal_occupations_are_geometric_and_zero_t_is_vacuum() {
        let p = BatteryParams {
            temperature: 0.2,
            fock_levels: 30,
            ..BatteryParams::default()
        };
        let th = thermal_occupations(&p);
        let q = (-p.omega0 / p.temperature).exp();
        for n in 0..29 {
            assert!((th[n + 1] / th[n] - q).abs() < 1e-12);
        }
        assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-14);

        let cold = BatteryParams {
            temperature: 0.0,
            ..BatteryParams::default()
        };
        let vac = thermal_occupations(&cold);
        assert_eq!(vac[0], 1.0);
        assert!(vac[1..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn conditioned_gibbs_mixtures_are_stationary() {
        let p = BatteryParams::default();
        let gen = thermal_rc_generator(&p).unwrap();
        for p1 in [0.0, 0.3, 1.0] {
            let rho = mixture(&p, p1);
            let residual = trace_norm(&gen.apply(rho.matrix()));
            assert!(
                residual <= 1e-9,
                "mixture p1 = {p1} drifts: residual {residual:.3e}"
            );
        }
    }

    #[test]
    fn undisplaced_cell_damps_the_oscillator_and_leaves_the_qubit_alone() {
        // ξ₀ = 0 and Γ = 0: the generator factorizes into a damped oscillator
        // and a free qubit. Populations and coherence magnitude of the qubit
        // must survive; the oscillator must forget its initial state.
        let p = BatteryParams {
            xi0: 0.0,
            g1_at_zero: 0.0,
            g2_at_zero: 0.0,
            temperature: 0.1,
            fock_levels: 30,
            ..BatteryParams::default()
        };
        assert_eq!(decoherence_rate(&p), 0.0);
        let gen = thermal_rc_generator(&p).unwrap();

        let n = p.fock_levels;
        let qubit = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let mut full = ComplexMatrix::zeros(2 * n, 2 * n);
        for e in 0..2 {
            for f in 0..2 {
                // qubit ⊗ |2⟩⟨2|
                full.data_mut()[(e * n + 2) * 2 * n + f * n + 2] = qubit[e] * qubit[f].conj();
            }
        }
        let rho0 = DensityMatrix::new(full).unwrap();
        let rho_t = propagate(&gen, &rho0, 6000.0).unwrap();

        let q_marg = partial_trace(rho_t.matrix(), &[2, n], &[0]).unwrap();
        assert!((q_marg.data()[0].re - 0.36).abs() < 1e-9);
        assert!((q_marg.data()[3].re - 0.64).abs() < 1e-9);
        // The coherence rotates at E_el but its magnitude is untouched.
        assert!((q_marg.data()[1].norm() - 0.48).abs() < 1e-9);

        let osc_marg = partial_trace(rho_t.matrix(), &[2, n], &[1]).unwrap();
        let dist = trace_distance(&osc_marg, &oscillator_thermal(&p));
        assert!(dist < 1e-8, "oscillator marginal off thermal by {dist:.3e}");
    }

    #[test]
    fn ambient_contact_conserves_electronic_populations() {
        let p = BatteryParams::default();
        let gen = thermal_rc_generator(&p).unwrap();
        let n = p.fock_levels;

        // An electronically coherent state with oscillator structure.
        let mut psi = vec![C64::new(0.0, 0.0); 2 * n];
        psi[3] = C64::new(1.0 / 2.0f64.sqrt(), 0.0);
        psi[n] = C64::new(0.0, 1.0 / 2.0f64.sqrt());
        let pure = DensityMatrix::from_pure(&psi).unwrap();
        let mut m = pure.matrix().scale_re(0.5);
        m.axpy_re(0.5, mixture(&p, 0.3).matrix());
        let rho0 = DensityMatrix::new(m).unwrap();

        let p1_full = p.excited_projector_full();
        let before = rho0.expectation(&p1_full).re;
        for t in [3.0, 30.0] {
            let rho_t = propagate(&gen, &rho0, t).unwrap();
            let after = rho_t.expectation(&p1_full).re;
            assert!(
                (after - before).abs() <= 1e-10,
                "population drifted by {:.3e} at t = {t}",
                (after - before).abs()
            );
        }
    }

    #[test]
    fn thermal_contact_matches_independent_weak_coupling_assembly() {
        // Route A: the generator as built here. Route B: hand the dressed
        // position coupling and the electronic projector to the generic
        // weak-coupling assembler with spectra pinned to the same three
        // values. The dephasing rate Γ = 4ξ₀²G₁(0) + G₂(0) must emerge from
        // the zero-frequency component of the position coupling on its own.
        let p = BatteryParams {
            fock_levels: 20,
            temperature: 0.05,
            xi0: 0.8,
            ..BatteryParams::default()
        };
        let mine = thermal_rc_generator(&p).unwrap();

        let h = dressed_hamiltonian(&p).unwrap();
        let a = p.annihilator_full();
        let mut position = a.clone();
        position.axpy_re(1.0, &a.dagger());
        position.axpy_re(2.0 * p.xi0, &p.excited_projector_full());
        let q = (-p.omega0 / p.temperature).exp();
        let rc_points = vec![
            (-p.omega0, p.gamma * q),
            (0.0, p.g1_at_zero),
            (p.omega0, p.gamma),
        ];
        let el_points = vec![(-1.0, p.g2_at_zero), (1.0, p.g2_at_zero)];
        let couplings = vec![
            (
                crate::davies::CouplingOperator::Hermitian(position),
                CouplingSpectrum::Tabulated(TabulatedSpectrum::new(rc_points).unwrap()),
            ),
            (
                crate::davies::CouplingOperator::Hermitian(p.excited_projector_full()),
                CouplingSpectrum::Tabulated(TabulatedSpectrum::new(el_points).unwrap()),
            ),
        ];
        let assembled = crate::davies::assemble_davies(&h, &couplings, 0.0).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(461);
        for _ in 0..2 {
            let rho = random_density(2 * p.fock_levels, &mut rng);
            let d1 = mine.apply(rho.matrix());
            let d2 = assembled.apply(rho.matrix());
            let scale = d1.frobenius_norm().max(1.0);
            assert!(
                d1.max_abs_diff(&d2) <= 1e-11 * scale,
                "assembled generator disagrees by {:.3e}",
                d1.max_abs_diff(&d2)
            );
        }
    }

    /// The displacement block of a ladder twice as deep, where round trips
    /// through the cut levels are negligible, so the exponential route
    /// reproduces the infinite-dimensional matrix elements on the block.
    fn displacement_block(xi: f64, n: usize, depth: usize) -> ComplexMatrix {
        let deep = FockSpace::new(depth).unwrap();
        let w = weyl(C64::new(xi, 0.0), deep);
        ComplexMatrix::from_fn(n, n, |r, c| w[(r, c)])
    }

    #[test]
    fn stripes_reassemble_the_displacement_operator() {
        // The stripes claim the exact infinite-dimensional entries. The
        // exponential of the *same-size* truncated generator would not do
        // as an oracle: its entries near the edge are polluted by paths
        // clipped at the cutoff, so the oracle must be deep enough that a
        // displaced copy of every compared column has left no mass near the
        // cut. Displacement shifts a column-c state up by ~ξ² with spread
        // ~√(ξ²(2c+1)); the √20 case therefore compares only 12 columns
        // against a 240-level exponential. It probes the strong-coupling
        // regime where a naive Franck–Condon power series loses all digits.
        for (xi, levels, depth) in [(0.9, 16, 32), (-0.6, 16, 32), (20f64.sqrt(), 12, 240)] {
            let p = BatteryParams {
                fock_levels: levels,
                xi0: xi,
                ..BatteryParams::default()
            };
            let w = displacement_block(xi, p.fock_levels, depth);
            let n = p.fock_levels as i64;
            let mut rebuilt = ComplexMatrix::zeros(p.fock_levels, p.fock_levels);
            for m in -(n - 1)..=(n - 1) {
                rebuilt.axpy_re(1.0, &weyl_stripe(&p, m));
            }
            assert!(
                w.max_abs_diff(&rebuilt) < 1e-11,
                "xi = {xi}: stripes deviate from expm route by {:.3e}",
                w.max_abs_diff(&rebuilt)
            );
        }

        // Truncating a unitary can only lose column mass, never create it:
        // Σ_rows |⟨r|W|c⟩|² ≤ 1 per column, with near-unit mass where the
        // displaced column fits inside the ladder. A cancellation-prone
        // entry formula fails this by orders of magnitude at ξ₀² = 20.
        let p = BatteryParams {
            fock_levels: 80,
            xi0: 20f64.sqrt(),
            ..BatteryParams::default()
        };
        let n = p.fock_levels as i64;
        let mut col_mass = vec![0.0; p.fock_levels];
        for m in -(n - 1)..=(n - 1) {
            let stripe = weyl_stripe(&p, m);
            for col in 0..p.fock_levels {
                let row = col as i64 + m;
                if (0..n).contains(&row) {
                    col_mass[col] += stripe.data()[row as usize * p.fock_levels + col].norm_sqr();
                }
            }
        }
        for (col, &mass) in col_mass.iter().enumerate() {
            assert!(
                mass <= 1.0 + 1e-12,
                "column {col} carries unphysical mass {mass:.6e}"
            );
        }
        assert!(
            col_mass[0] > 1.0 - 1e-10,
            "vacuum column lost mass inside the band: {:.6e}",
            col_mass[0]
        );
    }

    #[test]
    fn stripe_series_matches_ladder_operator_expansion() {
        // Independent route: build Σ_k (−1)^k ξ^{2k+m}/(k!(k+m)!) (A†)^{k+m} A^k
        // with explicit truncated ladder matrices.
        let p = BatteryParams {
            fock_levels: 12,
            xi0: 1.1,
            ..BatteryParams::default()
        };
        let n = p.fock_levels;
        let a = boson_annihilator(p.fock());
        let ad = a.dagger();
        for m in [-3i64, -1, 0, 2, 4] {
            let mut series = ComplexMatrix::zeros(n, n);
            let k0 = (-m).max(0);
            for k in k0..(n as i64) {
                // (−1)^k ξ^{2k+m} / (k!(k+m)!): the k-loop carries
                // (−ξ²)^k / k!, the second loop divides by (k+m)!.
                let mut coeff = p.xi0.powi(m as i32);
                for j in 1..=k {
                    coeff *= -p.xi0 * p.xi0 / j as f64;
                }
                for j in 1..=(k + m) {
                    coeff /= j as f64;
                }
                let mut term = ComplexMatrix::identity(n);
                for _ in 0..k {
                    term = term.matmul(&a);
                }
                for _ in 0..(k + m) {
                    term = ad.matmul(&term);
                }
                series.axpy_re(coeff, &term);
            }
            let series = series.scale_re((-0.5 * p.huang_rhys()).exp());
            let stripe = weyl_stripe(&p, m);
            assert!(
                series.max_abs_diff(&stripe) < 1e-12,
                "m = {m}: {:.3e}",
                series.max_abs_diff(&stripe)
            );
        }
    }

    #[test]
    fn vacuum_sideband_weights_are_poissonian() {
        let p = BatteryParams {
            xi0: 1.2,
            fock_levels: 40,
            ..BatteryParams::default()
        };
        let s = p.huang_rhys();
        let mut pois = (-s).exp();
        for m in 0..9i64 {
            let stripe = weyl_stripe(&p, m);
            let got = stripe.data()[(m as usize) * p.fock_levels].re.powi(2);
            assert!(
                (got - pois).abs() <= 1e-10 * pois,
                "m = {m}: vacuum weight {got:.12e} vs Poisson {pois:.12e}"
            );
            pois *= s / (m + 1) as f64;
        }
        for m in [-3i64, -1] {
            let stripe = weyl_stripe(&p, m);
            for row in 0..p.fock_levels {
                assert_eq!(stripe.data()[row * p.fock_levels].re, 0.0);
            }
        }
    }

    #[test]
    fn zero_displacement_collapses_to_the_bare_lowering_operator() {
        let p = BatteryParams {
            xi0: 0.0,
            fock_levels: 20,
            ..BatteryParams::default()
        };
        let v0 = vm_operator(0, &p).unwrap();
        let expected = electronic_lowering().kron(&ComplexMatrix::identity(p.fock_levels));
        assert!(v0.matrix().max_abs_diff(&expected) < 1e-15);
        for m in [-4i64, -1, 1, 5] {
            let vm = vm_operator(m, &p).unwrap();
            assert!(vm.matrix().frobenius_norm() < 1e-15, "m = {m} should vanish");
        }
    }

    #[test]
    fn sidebands_are_bohr_components_of_the_dressed_coupling() {
        let p = BatteryParams {
            fock_levels: 30,
            xi0: 1.2,
            e_el: 1.03,
            omega0: 0.173,
            ..BatteryParams::default()
        };
        let h = dressed_hamiltonian(&p).unwrap();
        let w = displacement_block(p.xi0, p.fock_levels, 2 * p.fock_levels);
        let lowering = electronic_lowering().kron(&w);
        let decomp = bohr_decompose(&h, &lowering, 0.0).unwrap();
        for m in -2i64..=4 {
            let vm = vm_operator(m, &p).unwrap();
            let component = decomp
                .component(vm.frequency(&p), 1e-6)
                .unwrap_or_else(|| panic!("no Bohr component at m = {m}"));
            assert!(
                vm.matrix().max_abs_diff(component) <= 1e-8,
                "m = {m}: sideband deviates from Bohr component by {:.3e}",
                vm.matrix().max_abs_diff(component)
            );
        }
    }

    #[test]
    fn sideband_indices_outside_the_ladder_are_refused() {
        let p = BatteryParams {
            fock_levels: 10,
            xi0: 0.5,
            ..BatteryParams::default()
        };
        assert!(vm_operator(8, &p).is_ok());
        assert!(matches!(vm_operator(9, &p), Err(Error::Config(_))));
        assert!(matches!(vm_operator(-9, &p), Err(Error::Config(_))));
    }

    #[test]
    fn sideband_completeness_sums_to_unity() {
        for p in [
            BatteryParams::default(),
            BatteryParams {
                temperature: 0.1,
                xi0: 1.3,
                ..BatteryParams::default()
            },
        ] {
            let rho1 = conditioned_gibbs(&p, 1).unwrap();
            let max_m = p.fock_levels as i64 - 2;
            let mut total = 0.0;
            for m in -max_m..=max_m {
                let vm = vm_operator(m, &p).unwrap();
                let vdv = vm.matrix().dagger().matmul(vm.matrix());
                total += rho1.expectation(&vdv).re;
            }
            assert!(
                (total - 1.0).abs() <= 1e-8,
                "T = {}, ξ₀ = {}: Σ_m ⟨V_m†V_m⟩ = {total:.12}",
                p.temperature,
                p.xi0
            );
        }
    }

    #[test]
    fn charging_generator_matches_rotating_wave_assembly() {
        // The hand-rolled sideband loop against the generic Davies assembler
        // fed the dressed de-excitation operator as a rotating-wave coupling.
        // The gap is kept off the sideband grid so every transition
        // frequency is signed unambiguously.
        let p = BatteryParams {
            fock_levels: 20,
            temperature: 0.05,
            xi0: 0.8,
            e_el: 1.03,
            delta_mu: 0.6,
            ..BatteryParams::default()
        };
        let spec = CouplingSpectrum::Chemical {
            profile: RateProfile::Gaussian {
                peak_rate: 2e-3,
                center: p.e_el,
                width: 0.3,
            },
            t1: p.temperature,
            delta_g: p.delta_mu,
        };
        let mine = charging_generator(&p, &spec).unwrap();

        let h = dressed_hamiltonian(&p).unwrap();
        let w = displacement_block(p.xi0, p.fock_levels, 2 * p.fock_levels);
        let lowering = electronic_lowering().kron(&w);
        let assembled = crate::davies::assemble_davies(
            &h,
            &[(
                crate::davies::CouplingOperator::RotatingWave { lowering },
                spec.clone(),
            )],
            0.0,
        )
        .unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(462);
        for _ in 0..2 {
            let rho = random_density(2 * p.fock_levels, &mut rng);
            let d1 = mine.apply(rho.matrix());
            let mut d2 = assembled.apply(rho.matrix());
            // The assembler also carries the Hamiltonian commutator; strip it.
            d2.axpy_re(1.0, &h.matrix().commutator(rho.matrix()).scale(C64::new(0.0, 1.0)));
            let scale = d1.frobenius_norm().max(1e-6);
            assert!(
                d1.max_abs_diff(&d2) <= 1e-10 * scale,
                "sideband assembly disagrees by {:.3e}",
                d1.max_abs_diff(&d2)
            );
        }
    }

    #[test]
    fn mismatched_balance_law_is_rejected() {
        let p = BatteryParams {
            delta_mu: 0.5,
            ..BatteryParams::default()
        };
        // A plain thermal spectrum balances at shift 0, not at Δμ = 0.5.
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::Flat { rate: 1e-3 },
            temperature: p.temperature,
        };
        assert!(matches!(
            charging_generator(&p, &spec),
            Err(Error::InvariantViolation { .. })
        ));
        // The same spectrum is exactly what discharge expects.
        assert!(discharge_generator(&p, &spec).is_ok());
    }

    #[test]
    fn spectrum_below_the_gap_yields_an_empty_generator() {
        let p = BatteryParams::default();
        let spec = CouplingSpectrum::Chemical {
            profile: RateProfile::Gaussian {
                peak_rate: 1e-3,
                center: 0.234,
                width: 5e-4,
            },
            t1: p.temperature,
            delta_g: p.delta_mu,
        };
        let gen = charging_generator(&p, &spec).unwrap();
        assert!(gen.channels().is_empty());
    }

    #[test]
    fn charged_state_matches_the_steady_state_across_bias_and_displacement() {
        // Full stationary solve at the canonical truncation (dim 80) against
        // the closed-form two-branch Gibbs mixture, across charging biases
        // (below, at, and above the gap) and displacement strengths. The
        // exciton rate is raised to keep the slowest relaxation mode well
        // above the kernel solver's resolution; the fixed point itself does
        // not depend on the rate.
        let base = BatteryParams {
            gamma_ex: 1e-2,
            ..BatteryParams::default()
        };
        for delta_mu in [0.8, 1.0, 1.05] {
            for xi0 in [0.0, 0.8, 1.5] {
                let p = BatteryParams {
                    delta_mu,
                    xi0,
                    ..base
                };
                let spec = canonical_charging_spectrum(&p);
                let gen = BatteryGenerator::charging(&p, &spec).unwrap();
                let rho = stationary_state(&gen.total().unwrap())
                    .unwrap_or_else(|e| panic!("Δμ = {delta_mu}, ξ₀ = {xi0}: {e}"));
                let target = analytic_stationary(&p).unwrap();
                let dist = trace_distance(rho.matrix(), target.matrix());
                assert!(
                    dist <= 1e-6,
                    "Δμ = {delta_mu}, ξ₀ = {xi0}: trace distance {dist:.3e}"
                );
                if delta_mu == p.e_el {
                    let pop = rho.expectation(&p.excited_projector_full()).re;
                    assert!(
                        (pop - 0.5).abs() <= 1e-8,
                        "resonant bias should split populations evenly, got {pop}"
                    );
                }
            }
        }
    }

    #[test]
    fn unbiased_charging_relaxes_to_thermal_equilibrium() {
        // With Δμ = 0 the charging reservoir is just another thermal bath,
        // so a plain thermal spectrum passes the balance check and the cell
        // settles into the unbiased Gibbs mixture.
        let p = BatteryParams {
            delta_mu: 0.0,
            ..BatteryParams::default()
        };
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::Gaussian {
                peak_rate: p.gamma_ex,
                center: p.e_el,
                width: 0.4 * p.omega0,
            },
            temperature: p.temperature,
        };
        let gen = BatteryGenerator::charging(&p, &spec).unwrap();
        let rho = stationary_state(&gen.total().unwrap()).unwrap();
        let target = analytic_stationary(&p).unwrap();
        assert!(trace_distance(rho.matrix(), target.matrix()) <= 1e-6);
    }

    #[test]
    fn zero_temperature_discharge_only_releases_energy() {
        // At T = 0 a cold reservoir can only absorb. This does NOT mean
        // every jump de-excites the electron: a sideband with mω₀ > E_el
        // raises the electron by burning more than the gap in oscillator
        // quanta, and survives at T = 0. The sharp statement is that every
        // retained jump is an exact energy ladder operator, [H, L] = −ωL,
        // with strictly positive drop ω.
        let p = BatteryParams {
            temperature: 0.0,
            ..BatteryParams::default()
        };
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::OhmicGaussian {
                coupling: 1.0,
                cutoff: 3.0,
            },
            temperature: 0.0,
        };
        let gen = discharge_generator(&p, &spec).unwrap();
        assert!(!gen.channels().is_empty());
        let h = dressed_hamiltonian(&p).unwrap();
        let mut saw_electron_raising = false;
        let p1 = p.excited_projector_full();
        for (_, jump) in gen.channels() {
            let comm = h.matrix().commutator(jump);
            let omega = -jump.dagger().matmul(&comm).trace().re
                / jump.frobenius_norm().powi(2);
            assert!(omega > 1e-12, "channel does not lower the energy: ω = {omega:.3e}");
            let mut defect = comm;
            defect.axpy_re(omega, jump);
            assert!(
                defect.max_abs() <= 1e-10 * jump.max_abs(),
                "channel is not a clean ladder operator"
            );
            if p1.matmul(jump).frobenius_norm() > 1e-12 {
                saw_electron_raising = true;
            }
        }
        assert!(
            saw_electron_raising,
            "oscillator-funded re-excitation sidebands should survive at T = 0"
        );

        // The empty cell at T = 0 is exactly dark: every channel annihilates
        // the vacuum-ground state structurally, with no rounding residue.
        let full = BatteryGenerator::discharging(&p, &spec).unwrap();
        let rho0 = conditioned_gibbs(&p, 0).unwrap();
        assert_eq!(trace_norm(&full.apply(rho0.matrix())), 0.0);

        // The ambient part loses its pumping channel too.
        assert_eq!(full.thermal_rc.channels().len(), 2); // damping + dephasing
    }

    #[test]
    fn discharged_branch_is_stationary_up_to_activation_scale() {
        // At T > 0 the only leak out of the empty cell is thermal
        // re-excitation across the gap. With a reservoir line of width w at
        // the gap, the dominant upward rate is bounded by
        // max_ν e^{−ν/T} G(ν) ≈ e^{−(E_el − w²/T)/T} · gamma_ex, so the
        // residual sits at the activation scale e^{−E_el/T} — far below any
        // bare rate in the generator but well above rounding.
        let p = BatteryParams {
            e_el: 1.03,
            temperature: 0.05,
            ..BatteryParams::default()
        };
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::Gaussian {
                peak_rate: p.gamma_ex,
                center: p.e_el,
                width: 0.04,
            },
            temperature: p.temperature,
        };
        let gen = BatteryGenerator::discharging(&p, &spec).unwrap();
        let rho0 = conditioned_gibbs(&p, 0).unwrap();
        let residual = trace_norm(&gen.apply(rho0.matrix()));
        let activation = (-p.e_el / p.temperature).exp() * p.gamma_ex;
        assert!(residual > 0.0, "re-excitation should not vanish at T > 0");
        assert!(
            residual <= 100.0 * activation,
            "residual {residual:.3e} exceeds activation scale {activation:.3e}"
        );
    }

    #[test]
    fn discharge_rate_routes_agree() {
        let p = BatteryParams {
            temperature: 0.1,
            xi0: 0.9,
            ..BatteryParams::default()
        };
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::OhmicGaussian {
                coupling: 1.0,
                cutoff: 3.0,
            },
            temperature: p.temperature,
        };
        let rate = discharge_rate(&p, &spec).unwrap();
        assert!(rate.direct > 0.0);
        assert!(
            (rate.direct - rate.closed_form).abs() <= 1e-9 * rate.closed_form,
            "matrix route {:.15e} vs scalar route {:.15e}",
            rate.direct,
            rate.closed_form
        );
    }

    #[test]
    fn discharge_rate_reaches_the_poisson_form_as_temperature_vanishes() {
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::OhmicGaussian {
                coupling: 1.0,
                cutoff: 3.0,
            },
            temperature: 0.0,
        };
        let cold = BatteryParams {
            temperature: 0.0,
            xi0: 1.1,
            ..BatteryParams::default()
        };
        let rate = discharge_rate(&cold, &spec).unwrap();
        assert!(
            (rate.closed_form - rate.poisson_zero_t).abs() <= 1e-12 * rate.poisson_zero_t,
            "T = 0: closed form {:.15e} vs Poisson {:.15e}",
            rate.closed_form,
            rate.poisson_zero_t
        );

        // Approach from above: at small T the thermal smearing correction is
        // already tiny.
        let cool = BatteryParams {
            temperature: 0.005,
            xi0: 1.1,
            ..BatteryParams::default()
        };
        let warm_spec = CouplingSpectrum::Thermal {
            profile: RateProfile::OhmicGaussian {
                coupling: 1.0,
                cutoff: 3.0,
            },
            temperature: cool.temperature,
        };
        let rate = discharge_rate(&cool, &warm_spec).unwrap();
        assert!(
            (rate.closed_form - rate.poisson_zero_t).abs() <= 0.01 * rate.poisson_zero_t,
            "T = 0.005: closed form {:.6e} vs Poisson {:.6e}",
            rate.closed_form,
            rate.poisson_zero_t
        );
    }

    #[test]
    fn flat_spectrum_discharge_recovers_the_total_weight() {
        // A frequency-independent reservoir sees the full Franck–Condon sum,
        // which is unity: the rate equals the flat level g₀ regardless of
        // displacement.
        let g0 = 0.37;
        let table: Vec<(f64, f64)> = (-60..=60).map(|k| (k as f64 * 0.1, g0)).collect();
        let spec = CouplingSpectrum::Tabulated(TabulatedSpectrum::new(table).unwrap());
        let p = BatteryParams {
            temperature: 0.0,
            xi0: 1.0,
            ..BatteryParams::default()
        };
        let rate = discharge_rate(&p, &spec).unwrap();
        for (label, value) in [
            ("direct", rate.direct),
            ("closed", rate.closed_form),
            ("poisson", rate.poisson_zero_t),
        ] {
            assert!(
                (value - g0).abs() <= 1e-8 * g0,
                "{label} route: {value:.12e} vs flat level {g0}"
            );
        }
    }

    #[test]
    fn undisplaced_discharge_samples_the_spectrum_at_the_gap() {
        let p = BatteryParams {
            xi0: 0.0,
            temperature: 0.0,
            ..BatteryParams::default()
        };
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::OhmicGaussian {
                coupling: 0.7,
                cutoff: 2.0,
            },
            temperature: 0.0,
        };
        let rate = discharge_rate(&p, &spec).unwrap();
        let expected = spec.eval(p.e_el).unwrap();
        assert!((rate.direct - expected).abs() <= 1e-12 * expected);
        assert!((rate.closed_form - expected).abs() <= 1e-12 * expected);
        assert!((rate.asymptotic - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn strong_coupling_rate_approaches_the_shifted_spectral_sample() {
        // S = 20 with ω_el/ω₀ = 10: the Poisson comb is centred a full
        // S·ω₀ = 2 below the gap. For a slowly varying spectrum the comb
        // average collapses onto the single sample G(E_el − S·ω₀).
        let s: f64 = 20.0;
        let p = BatteryParams {
            xi0: s.sqrt(),
            temperature: 0.0,
            fock_levels: 80,
            ..BatteryParams::default()
        };
        let g0 = 1e-2;
        let table: Vec<(f64, f64)> = (-2400..=2400)
            .map(|k| {
                let w = k as f64 * 0.005;
                (w, g0 * (-w * w / (2.0 * 1.5 * 1.5)).exp())
            })
            .collect();
        let spec = CouplingSpectrum::Tabulated(TabulatedSpectrum::new(table).unwrap());
        let rate = discharge_rate(&p, &spec).unwrap();
        let shifted = p.e_el - s * p.omega0;
        assert!((rate.asymptotic - spec.eval(shifted).unwrap()).abs() < 1e-12);
        let rel = (rate.poisson_zero_t - rate.asymptotic).abs() / rate.asymptotic;
        assert!(
            rel <= 0.1,
            "comb average deviates from the shifted sample by {rel:.3}"
        );
        // And the matrix route still agrees with the scalar comb (looser
        // here: dim-160 products accumulate more rounding than the dim-80
        // identity checked elsewhere).
        assert!(
            (rate.direct - rate.closed_form).abs() <= 1e-7 * rate.closed_form,
            "direct {:.15e} vs closed form {:.15e}",
            rate.direct,
            rate.closed_form
        );
    }

    #[test]
    fn discharge_rate_is_non_increasing_in_the_coupling_strength() {
        // At T = 0 only sidebands above zero frequency survive, and an Ohmic
        // reservoir grows toward the gap: pushing the Poisson comb downward
        // with larger S can only lose weight. Asserted on the concrete scan.
        let spec = CouplingSpectrum::Thermal {
            profile: RateProfile::OhmicGaussian {
                coupling: 1.0,
                cutoff: 3.0,
            },
            temperature: 0.0,
        };
        let mut previous = f64::INFINITY;
        for s in [1.0f64, 5.0, 10.0, 20.0] {
            let p = BatteryParams {
                xi0: s.sqrt(),
                temperature: 0.0,
                fock_levels: 60,
                ..BatteryParams::default()
            };
            let rate = discharge_rate(&p, &spec).unwrap();
            assert!(
                rate.closed_form <= previous * (1.0 + 1e-12),
                "S = {s}: rate {:.6e} above previous {previous:.6e}",
                rate.closed_form
            );
            assert!((rate.direct - rate.closed_form).abs() <= 1e-9 * rate.closed_form.max(1e-30));
            previous = rate.closed_form;
        }
    }

    #[test]
    fn exponential_of_the_total_generator_is_a_quantum_channel() {
        let p = BatteryParams {
            fock_levels: 10,
            temperature: 0.02,
            xi0: 0.5,
            ..BatteryParams::default()
        };
        let spec = canonical_charging_spectrum(&p);
        let gen = BatteryGenerator::charging(&p, &spec).unwrap();
        let sup = generator_superop(&gen.total().unwrap()).unwrap();
        let channel = SuperOperatorMatrix::from_matrix(
            expm(&sup.matrix().scale_re(1.3)).unwrap(),
        )
        .unwrap();
        assert!(channel.is_cptp(1e-9));
    }

    #[test]
    fn generator_parts_annihilate_trace_and_sum_to_the_total() {
        let p = BatteryParams::default();
        let spec = canonical_charging_spectrum(&p);
        let gen = BatteryGenerator::charging(&p, &spec).unwrap();
        let total = gen.total().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(463);
        let rho = random_density(2 * p.fock_levels, &mut rng);

        let d_rc = gen.thermal_rc.apply(rho.matrix());
        let d_el = gen.electronic.apply(rho.matrix());
        let scale = d_rc.frobenius_norm().max(d_el.frobenius_norm());
        assert!(d_rc.trace().norm() <= 1e-12 * scale);
        assert!(d_el.trace().norm() <= 1e-12 * scale);

        let mut summed = d_rc;
        summed.axpy_re(1.0, &d_el);
        assert!(summed.max_abs_diff(&total.apply(rho.matrix())) <= 1e-13 * scale.max(1.0));
        assert!((gen.decoherence_rate - decoherence_rate(&p)).abs() == 0.0);
    }

    #[test]
    fn lab_frame_charged_branch_carries_the_displaced_occupation() {
        // Under the polaron rotation the charged branch becomes a displaced
        // thermal state: mean occupation S + n̄ in the bare basis.
        let p = BatteryParams::default();
        let rho1 = conditioned_gibbs(&p, 1).unwrap();
        let lab = to_lab_frame(&p, &rho1).unwrap();
        let a = boson_annihilator(p.fock());
        let number = ComplexMatrix::identity(2).kron(&a.dagger().matmul(&a));
        let q = (-p.omega0 / p.temperature).exp();
        let expected = p.huang_rhys() + q / (1.0 - q);
        let got = lab.expectation(&number).re;
        assert!(
            (got - expected).abs() <= 1e-8,
            "lab-frame occupation {got:.10} vs displaced thermal {expected:.10}"
        );
        // The dressed state itself is undisplaced.
        let dressed_occ = rho1.expectation(&number).re;
        assert!((dressed_occ - q / (1.0 - q)).abs() <= 1e-10);
    }
}
