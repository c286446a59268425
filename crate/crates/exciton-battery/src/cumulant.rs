//! Finite-time weak-coupling propagator built from the second-order cumulant
//! of the system–bath interaction, and its convergence to the Davies
//! semigroup.
//!
//! For a single Hermitian coupling `S ⊗ R` and a stationary bath with
//! correlation function `F(τ) = ⟨R(τ)R⟩`, the interaction-picture map
//! `exp(λ²𝓚⁽²⁾(t))` is completely positive and trace preserving for every
//! `t`, because `𝓚⁽²⁾(t)` is of GKLS form: in the Bohr decomposition
//! `S = Σ_ω S_ω`,
//!
//! ```text
//! 𝓚⁽²⁾(t)ρ = Σ_{ωω'} A_{ωω'}(t) S_ω ρ S_{ω'}†  −  M(t)ρ  −  ρM(t)†
//! A_{ωω'}(t) = ∫₀ᵗds∫₀ᵗdu F(u−s) e^{−iωs} e^{+iω'u}
//! M(t)       = Σ_{ω₁ω₂} B_{ω₁ω₂}(t) S_{ω₁} S_{ω₂}
//! B_{ω₁ω₂}(t) = ∫₀ᵗds e^{−iω₁s} ∫₀ˢdu e^{−iω₂u} F(s−u)
//! ```
//!
//! `[A_{ωω'}]` is the Gram matrix of the positive-definite kernel `F` against
//! the windowed phases `e^{iωu}`, hence PSD — that is the complete-positivity
//! statement. `M + M† = Σ A_{ωω'} S_{ω'}†S_ω` exactly, which splits `M` into
//! the anticommutator part of the dissipator plus the finite-time Lamb shift
//! `H_L(t) = (M − M†)/2i`. The diagonal coefficient grows as
//! `A_{ωω}(t) → t·Ĝ(ω)` with `Ĝ(ω) = ∫e^{+iωτ}F(τ)dτ` while every
//! off-diagonal stays bounded, which is precisely the convergence
//! `𝓚⁽²⁾(t)/t → 𝓛_Davies`.
//!
//! Everything here lives in the interaction picture of the system
//! Hamiltonian; the coupling constant λ stays explicit (in contrast to the
//! Markovian generators, which absorb λ² into their rates).

use crate::davies::{GKLSGenerator, bohr_decompose, generator_superop};
use crate::error::{Error, Result};
use crate::linalg::{
    C64, ComplexMatrix, DensityMatrix, HermitianOperator, ONE, SuperOperatorMatrix, ZERO, devec,
    expm, trace_norm, vec,
};

/// Hard cap on the system dimension (the cumulant is materialized as a
/// `d² × d²` superoperator).
const MAX_CUMULANT_DIM: usize = 32;

/// Absolute quadrature tolerance for tabulated correlation functions.
const QUAD_TOL: f64 = 1e-10;

/// Maximum bisection depth of the adaptive quadrature before giving up.
const MAX_QUAD_DEPTH: usize = 24;

// ---------------------------------------------------------------------------
// Bath correlation functions.
// ---------------------------------------------------------------------------

/// Stationary bath correlation function `F(τ) = ⟨R(τ)R⟩`, defined for τ ≥ 0
/// and extended to τ < 0 by `F(−τ) = conj(F(τ))` (the stationarity identity;
/// it is also exactly what Hermiticity preservation of the propagator
/// requires).
#[derive(Clone, Debug)]
pub enum BathCorrelation {
    /// `F(τ) = c·e^{−κ|τ|}e^{−iΩτ}`, whose spectrum is the Lorentzian
    /// `Ĝ(ω) = 2cκ/(κ² + (ω−Ω)²)` centred on the absorption side `+Ω`.
    ///
    /// With `kms_temperature = Some(T)` a mirrored term weighted `e^{−Ω/T}`
    /// is added, so the spectrum carries thermal-like gain at `−Ω`:
    /// `Ĝ(−Ω)/Ĝ(+Ω) ≈ e^{−Ω/T}`.
    Exponential {
        amplitude: f64,
        decay: f64,
        frequency: f64,
        kms_temperature: Option<f64>,
    },
    /// Samples `(τ_k, F(τ_k))` on `0 = τ_0 < τ_1 < …`, linearly interpolated;
    /// `F` is taken as zero beyond the last sample (the table must cover the
    /// support of the correlation). `F(0)` must be real.
    Tabulated { samples: Vec<(f64, C64)> },
}

/// One `c·e^{−κ|τ|}e^{−iΩτ}` constituent of an exponential correlation.
#[derive(Clone, Copy)]
struct ExpTerm {
    c: f64,
    kappa: f64,
    omega: f64,
}

impl BathCorrelation {
    pub fn validate(&self) -> Result<()> {
        match self {
            BathCorrelation::Exponential {
                amplitude,
                decay,
                frequency,
                kms_temperature,
            } => {
                if !(*amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err(Error::Config(format!(
                        "correlation amplitude must be finite and ≥ 0, got {amplitude}"
                    )));
                }
                if !(*decay > 0.0) || !decay.is_finite() {
                    return Err(Error::Config(format!(
                        "correlation decay rate must be finite and > 0, got {decay}"
                    )));
                }
                if !frequency.is_finite() {
                    return Err(Error::Config("correlation frequency must be finite".into()));
                }
                if let Some(t) = kms_temperature {
                    if !(*t > 0.0) {
                        return Err(Error::Config(format!(
                            "kms_temperature must be > 0, got {t}"
                        )));
                    }
                }
                Ok(())
            }
            BathCorrelation::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(Error::Config(
                        "tabulated correlation needs at least two samples".into(),
                    ));
                }
                if samples[0].0 != 0.0 {
                    return Err(Error::Config(format!(
                        "tabulated correlation must start at τ = 0, got {}",
                        samples[0].0
                    )));
                }
                for w in samples.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::Config(
                            "tabulated correlation times must be strictly increasing".into(),
                        ));
                    }
                }
                for (tau, f) in samples {
                    if !tau.is_finite() || !f.re.is_finite() || !f.im.is_finite() {
                        return Err(Error::Config(
                            "tabulated correlation contains non-finite entries".into(),
                        ));
                    }
                }
                let f0 = samples[0].1;
                if f0.im.abs() > 1e-12 * f0.norm().max(1e-300) {
                    return Err(Error::Config(format!(
                        "F(0) must be real (stationarity), got imaginary part {}",
                        f0.im
                    )));
                }
                self.check_spectrum_grid()
            }
        }
    }

    /// `F(τ)` for any real τ.
    pub fn eval(&self, tau: f64) -> C64 {
        if tau < 0.0 {
            return self.eval(-tau).conj();
        }
        match self {
            BathCorrelation::Exponential { .. } => self
                .exp_terms()
                .iter()
                .map(|t| t.c * (-t.kappa * tau).exp() * C64::from_polar(1.0, -t.omega * tau))
                .sum(),
            BathCorrelation::Tabulated { samples } => {
                let n = samples.len();
                if tau > samples[n - 1].0 {
                    return ZERO;
                }
                let hi = samples.partition_point(|(t, _)| *t <= tau).clamp(1, n - 1);
                let (t0, f0) = samples[hi - 1];
                let (t1, f1) = samples[hi];
                let x = (tau - t0) / (t1 - t0);
                f0 * (1.0 - x) + f1 * x
            }
        }
    }

    /// Spectrum `Ĝ(ω) = ∫e^{+iωτ}F(τ)dτ = 2Re∫₀^∞ e^{iωτ}F(τ)dτ` — closed
    /// Lorentzians for the exponential variant, quadrature for tables.
    pub fn spectrum(&self, omega: f64) -> Result<f64> {
        match self {
            BathCorrelation::Exponential { .. } => Ok(self
                .exp_terms()
                .iter()
                .map(|t| {
                    let y = omega - t.omega;
                    2.0 * t.c * t.kappa / (t.kappa * t.kappa + y * y)
                })
                .sum()),
            BathCorrelation::Tabulated { .. } => {
                let mut integrand =
                    |tau: f64| self.eval(tau) * C64::from_polar(1.0, omega * tau);
                let value = adaptive_gl(&mut integrand, &self.panels(f64::INFINITY), QUAD_TOL)?;
                Ok(2.0 * value.re)
            }
        }
    }

    fn exp_terms(&self) -> Vec<ExpTerm> {
        match self {
            BathCorrelation::Exponential {
                amplitude,
                decay,
                frequency,
                kms_temperature,
            } => {
                let mut terms = vec![ExpTerm {
                    c: *amplitude,
                    kappa: *decay,
                    omega: *frequency,
                }];
                if let Some(t) = kms_temperature {
                    terms.push(ExpTerm {
                        c: amplitude * (-frequency / t).exp(),
                        kappa: *decay,
                        omega: -frequency,
                    });
                }
                terms
            }
            BathCorrelation::Tabulated { .. } => Vec::new(),
        }
    }

    /// Integration breakpoints on `[0, min(upper, support)]`. For tables the
    /// interpolation kinks at every sample, so each panel is one sample
    /// interval; the exponential is smooth and gets a single panel.
    fn panels(&self, upper: f64) -> Vec<f64> {
        match self {
            BathCorrelation::Exponential { .. } => {
                let kappa = self
                    .exp_terms()
                    .iter()
                    .map(|t| t.kappa)
                    .fold(f64::INFINITY, f64::min);
                let cut = upper.min(45.0 / kappa);
                if cut > 0.0 { vec![0.0, cut] } else { vec![0.0] }
            }
            BathCorrelation::Tabulated { samples } => {
                let mut pts: Vec<f64> = samples
                    .iter()
                    .map(|(t, _)| *t)
                    .take_while(|t| *t < upper)
                    .collect();
                let last = samples[samples.len() - 1].0;
                if upper <= last {
                    pts.push(upper);
                }
                pts
            }
        }
    }

    /// The positivity of the spectrum is what complete positivity of the
    /// Markovian limit rests on; for tables it is only as good as the data,
    /// so it is spot-checked on a frequency grid up to the table's resolution
    /// limit.
    fn check_spectrum_grid(&self) -> Result<()> {
        let BathCorrelation::Tabulated { samples } = self else {
            return Ok(());
        };
        let min_step = samples
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::INFINITY, f64::min);
        let w_max = std::f64::consts::PI / min_step;
        let n = 81;
        let mut values = Vec::with_capacity(n);
        for k in 0..n {
            let omega = -w_max + 2.0 * w_max * k as f64 / (n - 1) as f64;
            values.push((omega, self.spectrum(omega)?));
        }
        let peak = values.iter().fold(0.0f64, |m, (_, g)| m.max(g.abs()));
        for (omega, g) in values {
            if g < -1e-8 * peak.max(1e-300) {
                return Err(Error::InvariantViolation {
                    what: format!(
                        "correlation table has negative spectrum Ĝ({omega:.6}) = {g:.3e} \
                         (not a positive-definite function)"
                    ),
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Stable elementary integrals.
// ---------------------------------------------------------------------------

/// `∫₀ᵗ e^{zs} ds`, series-expanded near `zt = 0` to avoid cancellation.
fn eint(z: C64, t: f64) -> C64 {
    let w = z * t;
    if w.norm() <= 1e-2 {
        // t·(1 + w/2 + w²/6 + w³/24 + w⁴/120 + w⁵/720); next term ~1e-16.
        let mut acc = C64::new(1.0, 0.0);
        for k in (2..=6).rev() {
            acc = ONE + acc * w / k as f64;
        }
        acc * t
    } else {
        (w.exp() - ONE) / z
    }
}

/// `(e^{z1·t} − e^{z2·t})/(z1 − z2)`, assuming `Re z ≤ 0` for both arguments
/// so the exponentials stay bounded. Factoring out the smaller exponent keeps
/// the near-degenerate case accurate; for widely separated arguments the
/// direct form is safe (the denominator is large) and avoids overflowing the
/// factored `e^{(z1−z2)t}`.
fn ediff(z1: C64, z2: C64, t: f64) -> C64 {
    let dz = z1 - z2;
    if dz.norm() * t <= 40.0 {
        if z1.re <= z2.re {
            (z1 * t).exp() * eint(-dz, t)
        } else {
            (z2 * t).exp() * eint(dz, t)
        }
    } else {
        ((z1 * t).exp() - (z2 * t).exp()) / dz
    }
}

// ---------------------------------------------------------------------------
// Cumulant coefficients: exact for exponential correlations, adaptive
// Gauss–Legendre for tabulated ones.
// ---------------------------------------------------------------------------

/// `A_{ωω'}(t)` for one exponential term (`a = κ + iΩ`):
/// the `u ≥ s` half contributes through `F(τ) = c·e^{−aτ}`, the `u < s` half
/// through the conjugate branch.
fn coeff_a_term(term: &ExpTerm, t: f64, om: f64, omp: f64) -> C64 {
    let c = term.c;
    let a = C64::new(term.kappa, term.omega);
    let i_delta = C64::new(0.0, omp - om);
    // u ≥ s: c/(iω'−a)·[(e^{iΔt} − e^{(iω'−a)t})/(a−iω) − eint(iΔ, t)]
    let z2 = C64::new(0.0, omp) - a;
    let part1 = c / z2 * (ediff(i_delta, z2, t) - eint(i_delta, t));
    // u < s: c/(iω'+ā)·[eint(iΔ, t) − eint(−(iω+ā), t)]
    let d2 = C64::new(0.0, omp) + a.conj();
    let z3 = -(C64::new(0.0, om) + a.conj());
    let part2 = c / d2 * (eint(i_delta, t) - eint(z3, t));
    part1 + part2
}

/// Time-ordered coefficient `B_{ω₁ω₂}(t)` for one exponential term.
fn coeff_b_term(term: &ExpTerm, t: f64, om1: f64, om2: f64) -> C64 {
    let c = term.c;
    let a = C64::new(term.kappa, term.omega);
    let sigma = C64::new(0.0, -(om1 + om2));
    let z = -(a + C64::new(0.0, om1));
    c / (a - C64::new(0.0, om2)) * (eint(sigma, t) - eint(z, t))
}

/// 15-point Gauss–Legendre abscissas (positive half) and weights.
const GL_X: [f64; 8] = [
    0.0,
    0.2011940939974345,
    0.3941513470775634,
    0.5709721726085388,
    0.7244177313601700,
    0.8482065834104272,
    0.9372733924007059,
    0.9879925180204854,
];
const GL_W: [f64; 8] = [
    0.2025782419255613,
    0.1984314853271116,
    0.1861610000155622,
    0.1662692058169939,
    0.1395706779261543,
    0.1071592204671719,
    0.0703660474881081,
    0.0307532419961173,
];

fn gl15(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64) -> C64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = GL_W[0] * f(mid);
    for k in 1..8 {
        let dx = half * GL_X[k];
        acc += GL_W[k] * (f(mid + dx) + f(mid - dx));
    }
    acc * half
}

fn adaptive_panel(
    f: &mut impl FnMut(f64) -> C64,
    a: f64,
    b: f64,
    tol: f64,
    depth: usize,
) -> Result<C64> {
    let whole = gl15(f, a, b);
    let mid = 0.5 * (a + b);
    let refined = gl15(f, a, mid) + gl15(f, mid, b);
    if (refined - whole).norm() <= tol {
        return Ok(refined);
    }
    if depth >= MAX_QUAD_DEPTH {
        return Err(Error::NumericalFailure {
            what: format!(
                "quadrature did not converge on [{a:.6e}, {b:.6e}] \
                 (residual {:.3e} > {tol:.3e} at depth {depth})",
                (refined - whole).norm()
            ),
        });
    }
    Ok(adaptive_panel(f, a, mid, 0.5 * tol, depth + 1)?
        + adaptive_panel(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// Integrates over the panel list, refining each panel adaptively.
fn adaptive_gl(f: &mut impl FnMut(f64) -> C64, panels: &[f64], tol: f64) -> Result<C64> {
    if panels.len() < 2 {
        return Ok(ZERO);
    }
    let per_panel = tol / (panels.len() - 1) as f64;
    let mut acc = ZERO;
    for w in panels.windows(2) {
        acc += adaptive_panel(f, w[0], w[1], per_panel, 0)?;
    }
    Ok(acc)
}

/// `A_{ωω'}(t)` by quadrature, via the single-integral reduction
/// `A = ∫₀ᵗ [F(τ)e^{iω'τ} + F̄(τ)e^{−iωτ}]·eint(iΔ, t−τ) dτ`, `Δ = ω'−ω`.
fn coeff_a_quad(f: &BathCorrelation, t: f64, om: f64, omp: f64) -> Result<C64> {
    let i_delta = C64::new(0.0, omp - om);
    let mut integrand = |tau: f64| {
        let fv = f.eval(tau);
        let phased = fv * C64::from_polar(1.0, omp * tau)
            + fv.conj() * C64::from_polar(1.0, -om * tau);
        phased * eint(i_delta, t - tau)
    };
    adaptive_gl(&mut integrand, &f.panels(t), QUAD_TOL)
}

/// `B_{ω₁ω₂}(t)` by quadrature:
/// `B = ∫₀ᵗ F(τ)e^{iω₂τ}·[eint(−iΣ, t) − eint(−iΣ, τ)] dτ`, `Σ = ω₁+ω₂`.
fn coeff_b_quad(f: &BathCorrelation, t: f64, om1: f64, om2: f64) -> Result<C64> {
    let sigma = C64::new(0.0, -(om1 + om2));
    let tail = eint(sigma, t);
    let mut integrand = |tau: f64| {
        f.eval(tau) * C64::from_polar(1.0, om2 * tau) * (tail - eint(sigma, tau))
    };
    adaptive_gl(&mut integrand, &f.panels(t), QUAD_TOL)
}

fn coeff_a(f: &BathCorrelation, t: f64, om: f64, omp: f64) -> Result<C64> {
    match f {
        BathCorrelation::Exponential { .. } => Ok(f
            .exp_terms()
            .iter()
            .map(|term| coeff_a_term(term, t, om, omp))
            .sum()),
        BathCorrelation::Tabulated { .. } => coeff_a_quad(f, t, om, omp),
    }
}

fn coeff_b(f: &BathCorrelation, t: f64, om1: f64, om2: f64) -> Result<C64> {
    match f {
        BathCorrelation::Exponential { .. } => Ok(f
            .exp_terms()
            .iter()
            .map(|term| coeff_b_term(term, t, om1, om2))
            .sum()),
        BathCorrelation::Tabulated { .. } => coeff_b_quad(f, t, om1, om2),
    }
}

// ---------------------------------------------------------------------------
// The cumulant superoperator.
// ---------------------------------------------------------------------------

/// Second-order cumulant `𝓚⁽²⁾(t)`, split into its dissipative part and the
/// finite-time Lamb-shift Hamiltonian `H_L(t)`.
pub struct CumulantK2 {
    /// Bohr frequencies of the coupling, ascending.
    pub frequencies: Vec<f64>,
    /// `[A_{ωω'}(t)]` over those frequencies — PSD for a genuine correlation
    /// function; its eigen-channels are the GKLS jump operators.
    pub kossakowski: ComplexMatrix,
    /// `Σ A_{ωω'} S_ω ρ S_{ω'}† − ½{P, ρ}` with `P = Σ A_{ωω'} S_{ω'}†S_ω`.
    pub dissipator: SuperOperatorMatrix,
    /// `H_L(t) = (M − M†)/2i`.
    pub lamb_shift: HermitianOperator,
}

impl CumulantK2 {
    /// The full generator exponent: dissipator plus `−i[H_L, ·]`.
    pub fn superop(&self) -> SuperOperatorMatrix {
        let hl = self.lamb_shift.matrix();
        let comm = SuperOperatorMatrix::left_mult(hl)
            .sub(&SuperOperatorMatrix::right_mult(hl))
            .scale(C64::new(0.0, -1.0));
        self.dissipator.add(&comm)
    }
}

/// Assembles `𝓚⁽²⁾(t)` for the coupling operator `s` (Hermitian) under the
/// system Hamiltonian `h` and bath correlation `f`.
pub fn cumulant_k2(
    h: &HermitianOperator,
    s: &ComplexMatrix,
    f: &BathCorrelation,
    t: f64,
) -> Result<CumulantK2> {
    let d = h.dim();
    if d > MAX_CUMULANT_DIM {
        return Err(Error::ResourceLimit {
            what: format!("cumulant superoperator requested for dim {d} (cap {MAX_CUMULANT_DIM})"),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvariantViolation {
            what: format!("cumulant time must be ≥ 0, got {t}"),
        });
    }
    f.validate()?;
    let s = HermitianOperator::new(s.clone())?;
    let decomp = bohr_decompose(h, s.matrix(), 0.0)?;
    let n = decomp.terms.len();
    let freqs: Vec<f64> = decomp.terms.iter().map(|(w, _)| *w).collect();
    let comps: Vec<&ComplexMatrix> = decomp.terms.iter().map(|(_, m)| m).collect();
    let daggers: Vec<ComplexMatrix> = comps.iter().map(|m| m.dagger()).collect();

    // A is Hermitian; compute the upper triangle and mirror so the PSD
    // structure is exact by construction.
    let mut a = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = coeff_a(f, t, freqs[i], freqs[j])?;
            if j == i {
                // Gram diagonal is exactly real; drop the rounding residue.
                a[(i, i)] = C64::new(v.re, 0.0);
            } else {
                a[(i, j)] = v;
                a[(j, i)] = v.conj();
            }
        }
    }

    let a_scale = a.max_abs();
    let mut sandwich = ComplexMatrix::zeros(d * d, d * d);
    let mut p = ComplexMatrix::zeros(d, d);
    for i in 0..n {
        for j in 0..n {
            let w = a[(i, j)];
            if w.norm() <= 1e-16 * a_scale {
                continue;
            }
            // S_ωρS_{ω'}† — and the matching S_{ω'}†S_ω into P, so that the
            // trace cancellation is exact in floating point as well.
            let kron = SuperOperatorMatrix::left_right(comps[i], &daggers[j]).into_matrix();
            sandwich.axpy(w, &kron);
            p.axpy(w, &daggers[j].matmul(comps[i]));
        }
    }

    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..n {
        for j in 0..n {
            let b = coeff_b(f, t, freqs[i], freqs[j])?;
            m.axpy(b, &comps[i].matmul(comps[j]));
        }
    }
    let lamb = (&m - &m.dagger()).scale(C64::new(0.0, -0.5)).hermitize();

    let dissipator = SuperOperatorMatrix::from_matrix(sandwich)?
        .sub(&SuperOperatorMatrix::left_mult(&p).scale_re(0.5))
        .sub(&SuperOperatorMatrix::right_mult(&p).scale_re(0.5));

    Ok(CumulantK2 {
        frequencies: freqs,
        kossakowski: a,
        dissipator,
        lamb_shift: HermitianOperator::new_unchecked(lamb),
    })
}

/// The finite-time propagator `exp(λ²·k2)`. Trace preservation is checked
/// (the exponent is GKLS-form, so a drift flags an assembly bug).
pub fn born_map(lambda: f64, k2: &SuperOperatorMatrix) -> Result<SuperOperatorMatrix> {
    if !lambda.is_finite() {
        return Err(Error::Config(format!("coupling must be finite, got {lambda}")));
    }
    let exponent = k2.matrix().scale_re(lambda * lambda);
    let scale = exponent.max_abs();
    let map = SuperOperatorMatrix::from_matrix(expm(&exponent)?)?;
    let d = map.dim();
    let id_vec = vec(&ComplexMatrix::identity(d));
    let back = map.matrix().dagger().matmul(&id_vec);
    let drift = back.max_abs_diff(&id_vec);
    if drift > 1e-10 * scale.max(1.0) {
        return Err(Error::NumericalFailure {
            what: format!("propagator is not trace preserving (drift {drift:.3e})"),
        });
    }
    Ok(map)
}

/// Markovian generator with rates read off the correlation's spectrum:
/// channels `(Ĝ(ω), S_ω)` and zero Hamiltonian (interaction picture). This is
/// the `t → ∞` limit of `𝓚⁽²⁾(t)/t`.
pub fn davies_from_correlation(
    h: &HermitianOperator,
    s: &ComplexMatrix,
    f: &BathCorrelation,
) -> Result<GKLSGenerator> {
    f.validate()?;
    let s = HermitianOperator::new(s.clone())?;
    let decomp = bohr_decompose(h, s.matrix(), 0.0)?;
    let mut rates = Vec::with_capacity(decomp.terms.len());
    let mut peak = 0.0f64;
    for (omega, _) in &decomp.terms {
        let g = f.spectrum(*omega)?;
        peak = peak.max(g.abs());
        rates.push(g);
    }
    let mut channels = Vec::with_capacity(rates.len());
    for (g, (_, jump)) in rates.into_iter().zip(decomp.terms) {
        if g < -1e-8 * peak.max(1e-300) {
            return Err(Error::InvariantViolation {
                what: format!("spectrum value {g:.3e} is negative"),
            });
        }
        channels.push((g.max(0.0), jump));
    }
    let zero_h = HermitianOperator::new_unchecked(ComplexMatrix::zeros(h.dim(), h.dim()));
    GKLSGenerator::new(zero_h, channels)
}

/// Trace distance between the finite-time propagator and the Markovian
/// semigroup, `‖exp(λ²𝓚⁽²⁾(t))ρ₀ − exp(λ²t𝓛)ρ₀‖₁/2` per grid time.
///
/// Both sides evolve the dissipative part only: the Lamb term is the
/// Hamiltonian renormalization that the physical Hamiltonian already absorbs,
/// so including it on one side would compare different frames rather than
/// different dissipative dynamics.
pub fn markov_distance_table(
    h: &HermitianOperator,
    s: &ComplexMatrix,
    f: &BathCorrelation,
    lambda: f64,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let gen = davies_from_correlation(h, s, f)?;
    let l_markov = generator_superop(&gen)?;
    let rho_vec = vec(rho0.matrix());
    let d = rho0.dim();
    let mut table = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let k2 = cumulant_k2(h, s, f, t)?;
        let refined = born_map(lambda, &k2.dissipator)?;
        let markov = expm(&l_markov.matrix().scale_re(lambda * lambda * t))?;
        let diff = &devec(&refined.matrix().matmul(&rho_vec), d)
            - &devec(&markov.matmul(&rho_vec), d);
        table.push((t, 0.5 * trace_norm(&diff)));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::davies::stationary_state;
    use crate::linalg::sampling::{random_density, random_hermitian};
    use crate::linalg::{herm_eig, trace_distance};
    use crate::operators::{BatteryParams, battery_hamiltonian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_level(e: f64) -> HermitianOperator {
        HermitianOperator::new(ComplexMatrix::diag_real(&[0.0, e])).unwrap()
    }

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]])
    }

    fn lorentzian(c: f64, kappa: f64, omega: f64) -> BathCorrelation {
        BathCorrelation::Exponential {
            amplitude: c,
            decay: kappa,
            frequency: omega,
            kms_temperature: None,
        }
    }

    #[test]
    fn eint_matches_direct_evaluation() {
        assert_eq!(eint(ZERO, 3.7), C64::new(3.7, 0.0));
        // Just under the series cutoff, where the direct form is still
        // accurate enough (cancellation loss ~ε/|zt| ≈ 2e-14) to cross-check.
        let z = C64::new(4e-3, -2e-3);
        let exact = ((z * 2.0).exp() - ONE) / z;
        assert!((eint(z, 2.0) - exact).norm() < 1e-13 * exact.norm());
        // Large imaginary argument.
        let z = C64::new(0.0, 5.0);
        let exact = ((z * 7.0).exp() - ONE) / z;
        assert!((eint(z, 7.0) - exact).norm() < 1e-14);
    }

    #[test]
    fn ediff_is_stable_in_both_regimes() {
        // Nearly degenerate exponents.
        let z1 = C64::new(-0.3, 1.0);
        let z2 = C64::new(-0.3, 1.0 + 1e-9);
        let v = ediff(z1, z2, 2.0);
        let expected = (z1 * 2.0).exp() * 2.0; // limit e^{z t}·t
        assert!((v - expected).norm() < 1e-7);
        // Widely separated, long time: no overflow, matches direct formula.
        let z1 = C64::new(0.0, 3.0);
        let z2 = C64::new(-0.5, -40.0);
        let t = 1e5;
        let direct = ((z1 * t).exp() - (z2 * t).exp()) / (z1 - z2);
        let v = ediff(z1, z2, t);
        assert!(v.norm().is_finite());
        assert!((v - direct).norm() < 1e-12);
    }

    #[test]
    fn zero_correlation_gives_zero_cumulant() {
        let f = BathCorrelation::Tabulated {
            samples: vec![(0.0, ZERO), (1.0, ZERO)],
        };
        let k2 = cumulant_k2(&two_level(1.0), &sigma_x(), &f, 2.5).unwrap();
        assert_eq!(k2.superop().matrix().max_abs(), 0.0);
        assert_eq!(k2.lamb_shift.matrix().max_abs(), 0.0);
    }

    #[test]
    fn identity_map_at_zero_coupling_and_zero_time() {
        let f = lorentzian(1.0, 1.0, 0.0);
        let h = two_level(1.0);
        let k2 = cumulant_k2(&h, &sigma_x(), &f, 3.0).unwrap();
        let map = born_map(0.0, &k2.superop()).unwrap();
        assert!(
            map.matrix()
                .max_abs_diff(&ComplexMatrix::identity(4))
                < 1e-15
        );
        let k2 = cumulant_k2(&h, &sigma_x(), &f, 0.0).unwrap();
        assert_eq!(k2.superop().matrix().max_abs(), 0.0);
    }

    #[test]
    fn cumulant_has_quadratic_onset() {
        let f = lorentzian(0.8, 1.3, 2.0);
        let h = two_level(1.7);
        let norm_at = |t: f64| {
            cumulant_k2(&h, &sigma_x(), &f, t)
                .unwrap()
                .superop()
                .matrix()
                .max_abs()
        };
        let (h1, h2) = (norm_at(1e-3), norm_at(2e-3));
        assert!(h1 > 0.0);
        assert!(((h2 / h1) - 4.0).abs() < 0.2, "ratio {}", h2 / h1);
    }

    #[test]
    fn closed_form_coefficients_match_quadrature() {
        // σ_x + 0.35σ_z has Bohr components at −E, 0, +E: exercises the
        // degenerate (ω = ω') and oscillatory branches of both coefficient
        // integrals.
        let e = 1.9;
        let s = ComplexMatrix::from_rows(&[
            vec![C64::new(0.35, 0.0), ONE],
            vec![ONE, C64::new(-0.35, 0.0)],
        ]);
        let h = two_level(e);
        let f = BathCorrelation::Exponential {
            amplitude: 0.9,
            decay: 0.7,
            frequency: 1.2,
            kms_temperature: Some(0.8),
        };
        let freqs = [-e, 0.0, e];
        for &t in &[0.3, 2.7] {
            for &w1 in &freqs {
                for &w2 in &freqs {
                    let a_closed = coeff_a(&f, t, w1, w2).unwrap();
                    let a_quad = coeff_a_quad(&f, t, w1, w2).unwrap();
                    assert!(
                        (a_closed - a_quad).norm() < 1e-9 * a_closed.norm().max(1.0),
                        "A({w1},{w2}) at t={t}: {a_closed} vs {a_quad}"
                    );
                    let b_closed = coeff_b(&f, t, w1, w2).unwrap();
                    let b_quad = coeff_b_quad(&f, t, w1, w2).unwrap();
                    assert!(
                        (b_closed - b_quad).norm() < 1e-9 * b_closed.norm().max(1.0),
                        "B({w1},{w2}) at t={t}: {b_closed} vs {b_quad}"
                    );
                }
            }
        }
        let k2 = cumulant_k2(&h, &s, &f, 1.1).unwrap();
        assert_eq!(k2.frequencies.len(), 3);
    }

    #[test]
    fn kossakowski_matrix_is_psd() {
        let s = ComplexMatrix::from_rows(&[
            vec![C64::new(0.4, 0.0), ONE],
            vec![ONE, C64::new(-0.4, 0.0)],
        ]);
        let h = two_level(1.3);
        let f = BathCorrelation::Exponential {
            amplitude: 1.1,
            decay: 0.6,
            frequency: 1.3,
            kms_temperature: Some(0.5),
        };
        for &t in &[0.05, 1.0, 30.0] {
            let k2 = cumulant_k2(&h, &s, &f, t).unwrap();
            let a = HermitianOperator::new(k2.kossakowski.clone()).unwrap();
            let values = herm_eig(&a).values;
            let max = values.last().copied().unwrap_or(0.0);
            assert!(
                values[0] >= -1e-12 * max.max(1.0),
                "min eig {} at t={t}",
                values[0]
            );
        }
    }

    #[test]
    fn cumulant_preserves_hermiticity_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(431);
        let h = random_hermitian(&mut rng, 3, 1.0);
        let s = random_hermitian(&mut rng, 3, 1.0).into_matrix();
        let f = lorentzian(0.7, 0.9, 0.4);
        let k2 = cumulant_k2(&h, &s, &f, 1.4).unwrap();
        let sup = k2.superop();
        for _ in 0..3 {
            let rho = random_hermitian(&mut rng, 3, 1.0).into_matrix();
            let out = sup.apply(&rho);
            assert!(out.hermiticity_deviation() < 1e-10);
            assert!(out.trace().norm() < 1e-12 * out.max_abs().max(1.0));
        }
    }

    #[test]
    fn lamb_shift_is_the_only_difference_between_superop_and_dissipator() {
        let f = lorentzian(1.0, 0.8, 1.5);
        let h = two_level(1.2);
        let k2 = cumulant_k2(&h, &sigma_x(), &f, 2.0).unwrap();
        assert!(k2.lamb_shift.matrix().max_abs() > 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(432);
        let rho = random_density(&mut rng, 2);
        let via_full = k2.superop().apply(rho.matrix());
        let comm = k2.lamb_shift.matrix().commutator(rho.matrix());
        let expected = &k2.dissipator.apply(rho.matrix()) - &comm.scale(C64::new(0.0, 1.0));
        assert!(via_full.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn born_map_is_cptp_for_two_level_and_battery() {
        let mut rng = ChaCha8Rng::seed_from_u64(433);
        let h = random_hermitian(&mut rng, 2, 1.0);
        let s = random_hermitian(&mut rng, 2, 1.0).into_matrix();
        let f = BathCorrelation::Exponential {
            amplitude: 0.8,
            decay: 1.1,
            frequency: 0.9,
            kms_temperature: Some(0.7),
        };
        for &t in &[0.1, 1.0, 10.0] {
            let k2 = cumulant_k2(&h, &s, &f, t).unwrap();
            let map = born_map(0.6, &k2.superop()).unwrap();
            assert!(map.is_cptp(1e-8), "two-level map not CPTP at t={t}");
        }

        let params = BatteryParams {
            e_el: 0.77,
            omega0: 0.173,
            xi0: 0.7,
            fock_levels: 8,
            ..BatteryParams::default()
        };
        let hb = battery_hamiltonian(&params).unwrap();
        let sb = sigma_x().kron(&ComplexMatrix::identity(params.fock_levels));
        for &t in &[0.1, 1.0, 10.0] {
            let k2 = cumulant_k2(&hb, &sb, &f, t).unwrap();
            let map = born_map(0.3, &k2.superop()).unwrap();
            assert!(map.is_cptp(1e-8), "battery map not CPTP at t={t}");
        }
    }

    #[test]
    fn long_time_cumulant_approaches_davies_generator() {
        // Well-separated Bohr frequencies (E = 10κ) keep the non-secular
        // off-diagonal coefficients small at t = 200/κ.
        let (e, kappa) = (10.0, 1.0);
        let h = two_level(e);
        let f = lorentzian(1.0, kappa, 0.0);
        let gen = davies_from_correlation(&h, &sigma_x(), &f).unwrap();
        let l_markov = generator_superop(&gen).unwrap();
        let distance_at = |t: f64| {
            let k2 = cumulant_k2(&h, &sigma_x(), &f, t).unwrap();
            k2.dissipator
                .matrix()
                .scale_re(1.0 / t)
                .max_abs_diff(l_markov.matrix())
        };
        let d200 = distance_at(200.0 / kappa);
        assert!(d200 < 1e-3, "distance {d200} at t = 200/κ");
        // O(1/t) falloff: an order of magnitude more time, an order less
        // distance (with slack).
        let d20 = distance_at(20.0 / kappa);
        let d2000 = distance_at(2000.0 / kappa);
        assert!(d200 < 0.3 * d20);
        assert!(d2000 < 0.3 * d200);
    }

    #[test]
    fn markov_distance_vanishes_at_zero_and_stays_small_in_weak_coupling() {
        // λ²c/κ² = 0.01.
        let (c, kappa, lambda) = (1.0, 1.0, 0.1);
        let h = two_level(5.0);
        let f = lorentzian(c, kappa, 0.0);
        let rho0 = DensityMatrix::from_pure(&[ONE, ZERO]).unwrap();
        let table = markov_distance_table(
            &h,
            &sigma_x(),
            &f,
            lambda,
            &rho0,
            &[0.0, 25.0, 100.0],
        )
        .unwrap();
        assert_eq!(table[0].1, 0.0);
        assert!(table[2].1 < 1e-2, "distance {} at t = 100/κ", table[2].1);
    }

    #[test]
    fn refined_and_markov_dynamics_share_the_thermal_fixed_point() {
        let h = two_level(5.0);
        let f = BathCorrelation::Exponential {
            amplitude: 0.2,
            decay: 0.5,
            frequency: 5.0,
            kms_temperature: Some(2.0),
        };
        let gen = davies_from_correlation(&h, &sigma_x(), &f).unwrap();
        let stat = stationary_state(&gen).unwrap();

        let t = 1e5;
        let k2 = cumulant_k2(&h, &sigma_x(), &f, t).unwrap();
        let map = born_map(1.0, &k2.dissipator).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(434);
        let rho0 = random_density(&mut rng, 2);
        let refined_final = devec(&map.matrix().matmul(&vec(rho0.matrix())), 2);
        assert!(trace_distance(&refined_final, stat.matrix()) < 1e-4);

        let l = generator_superop(&gen).unwrap();
        let markov_final = devec(
            &expm(&l.matrix().scale_re(t)).unwrap().matmul(&vec(rho0.matrix())),
            2,
        );
        assert!(trace_distance(&refined_final, &markov_final) < 1e-4);
    }

    #[test]
    fn tabulated_correlation_reproduces_exponential_results() {
        let (c, kappa, omega) = (0.7, 1.0, 2.0);
        let exact = lorentzian(c, kappa, omega);
        let step = 0.004;
        let n = (40.0 / step) as usize;
        let samples: Vec<(f64, C64)> = (0..=n)
            .map(|k| {
                let tau = k as f64 * step;
                (tau, exact.eval(tau))
            })
            .collect();
        let table = BathCorrelation::Tabulated { samples };
        table.validate().unwrap();

        for &w in &[-2.0, 0.0, 1.3, 2.0] {
            let gt = table.spectrum(w).unwrap();
            let ge = exact.spectrum(w).unwrap();
            assert!((gt - ge).abs() < 1e-4 * ge.max(1.0), "Ĝ({w}): {gt} vs {ge}");
        }

        let h = two_level(1.4);
        let t = 3.0;
        let k_table = cumulant_k2(&h, &sigma_x(), &table, t).unwrap();
        let k_exact = cumulant_k2(&h, &sigma_x(), &exact, t).unwrap();
        let scale = k_exact.superop().matrix().max_abs();
        assert!(
            k_table
                .superop()
                .matrix()
                .max_abs_diff(k_exact.superop().matrix())
                < 5e-4 * scale.max(1.0)
        );
    }

    #[test]
    fn validation_rejects_non_positive_definite_table() {
        // A boxcar correlation: its spectrum is a sinc with negative lobes.
        let samples: Vec<(f64, C64)> = (0..=20)
            .map(|k| (k as f64 * 0.05, ONE))
            .collect();
        let f = BathCorrelation::Tabulated { samples };
        match f.validate() {
            Err(Error::InvariantViolation { what }) => {
                assert!(what.contains("negative spectrum"), "{what}");
            }
            other => panic!("expected invariant violation, got {other:?}"),
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let f = BathCorrelation::Exponential {
            amplitude: 0.9,
            decay: 0.8,
            frequency: 1.1,
            kms_temperature: Some(0.6),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(435);
        let h = random_hermitian(&mut rng, 4, 1.0);
        let s = random_hermitian(&mut rng, 4, 1.0).into_matrix();
        let k1 = cumulant_k2(&h, &s, &f, 1.7).unwrap();
        let k2 = cumulant_k2(&h, &s, &f, 1.7).unwrap();
        assert_eq!(k1.superop().matrix().max_abs_diff(k2.superop().matrix()), 0.0);
        assert_eq!(
            k1.lamb_shift.matrix().max_abs_diff(k2.lamb_shift.matrix()),
            0.0
        );
    }
}
