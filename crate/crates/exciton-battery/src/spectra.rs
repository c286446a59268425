//! Coupling spectra: the bath-side input to weak-coupling generators.
//!
//! A [`CouplingSpectrum`] is a nonnegative function `ω → G(ω)` over signed
//! transition frequencies. The sign convention follows the generator
//! assembly: `ω` is the energy the *system* releases into the bath, so
//! positive-frequency values set relaxation (downward) rates and
//! negative-frequency values set excitation (upward) rates. Each variant
//! carries its own detailed-balance law relating the two sides:
//!
//! * [`CouplingSpectrum::Thermal`] — `G(−ω) = e^{−ω/T} G(ω)`,
//! * [`CouplingSpectrum::Chemical`] — upward rates pick up the Gibbs free
//!   energy `Δg` released per reaction step: `G(−ω) = e^{−(ω−Δg)/T₁} G(ω)`,
//! * [`CouplingSpectrum::Excitonic`] — a fermionic two-band reservoir held
//!   at chemical potentials `μ_a`, `μ_b`; the balance exponent shifts by
//!   `Δμ = μ_a − μ_b`,
//! * [`CouplingSpectrum::Tabulated`] — raw `(ω, G)` samples with linear
//!   interpolation and no declared balance law.
//!
//! Throughout, `ħ = k_B = 1` and rates are the physical `λ²G/ℏ²` products;
//! the coupling constant is never tracked separately here.

use crate::error::{Error, Result};

/// Default width of the Gaussian delta regularizing the excitonic spectrum.
///
/// The discrete two-band sum replaces Dirac deltas by Gaussians whose width
/// should be of the order of the relaxation rates resolved by the generator;
/// `1e-3` energy units is a safe default for the regimes treated here and can
/// be overridden per spectrum.
pub const DEFAULT_DELTA_WIDTH: f64 = 1e-3;

/// Fermi–Dirac occupation `1 / (e^{(ε−μ)/T} + 1)`, computed in a form that
/// stays finite for arguments far into either tail.
pub fn fermi_occupation(energy: f64, mu: f64, temperature: f64) -> f64 {
    let x = (energy - mu) / temperature;
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Normalized Gaussian `δ_η(x) = e^{−x²/2η²} / (η√(2π))`.
fn gaussian_delta(x: f64, eta: f64) -> f64 {
    let t = x / eta;
    (-0.5 * t * t).exp() / (eta * (2.0 * std::f64::consts::PI).sqrt())
}

/// `e^{−x/t}` with the `x = 0` limit pinned to 1 so that `t = 0` (a
/// zero-temperature bath) yields the step function instead of NaN.
fn boltzmann(x: f64, t: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (-x / t).exp()
    }
}

/// Downward-rate profile `γ(ω ≥ 0)` for the thermal and chemical variants.
///
/// The detailed-balance laws fix only the ratio of upward to downward rates;
/// the profile itself is a modelling choice.
#[derive(Clone, Debug, PartialEq)]
pub enum RateProfile {
    /// Frequency-independent rate.
    Flat { rate: f64 },
    /// Ohmic ramp with a Gaussian cutoff: `coupling · ω · e^{−(ω/cutoff)²}`.
    OhmicGaussian { coupling: f64, cutoff: f64 },
    /// Gaussian line centred at `center`: `peak_rate · e^{−(ω−center)²/2width²}`.
    Gaussian {
        peak_rate: f64,
        center: f64,
        width: f64,
    },
}

impl RateProfile {
    /// Evaluates the profile at a transition frequency `ω ≥ 0`.
    pub fn eval(&self, omega: f64) -> f64 {
        debug_assert!(omega >= 0.0, "rate profiles are defined for ω ≥ 0");
        match *self {
            RateProfile::Flat { rate } => rate,
            RateProfile::OhmicGaussian { coupling, cutoff } => {
                let t = omega / cutoff;
                coupling * omega * (-t * t).exp()
            }
            RateProfile::Gaussian {
                peak_rate,
                center,
                width,
            } => {
                let t = (omega - center) / width;
                peak_rate * (-0.5 * t * t).exp()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateProfile::Flat { rate } => rate.is_finite() && rate >= 0.0,
            RateProfile::OhmicGaussian { coupling, cutoff } => {
                coupling.is_finite() && coupling >= 0.0 && cutoff > 0.0
            }
            RateProfile::Gaussian {
                peak_rate,
                center,
                width,
            } => peak_rate.is_finite() && peak_rate >= 0.0 && center.is_finite() && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvariantViolation {
                what: format!("rate profile parameters out of range: {self:?}"),
            })
        }
    }
}

/// Two-band fermionic reservoir spectrum.
///
/// Band `a` (upper) modes with energies `E_a(k)` and band `b` (lower) modes
/// with energies `E_b(ℓ)` exchange quanta with the system through matrix
/// elements `g_{kℓ}`. For `ω ≥ 0`,
///
/// ```text
/// G(ω)  = Σ_{kℓ} |g_{kℓ}|² δ_η(E_a(k) − E_b(ℓ) − ω) · f_b(ℓ)(1 − f_a(k))
/// G(−ω) = Σ_{kℓ} |g_{kℓ}|² δ_η(E_a(k) − E_b(ℓ) − ω) · f_a(k)(1 − f_b(ℓ))
/// ```
///
/// with Fermi–Dirac occupations `f` at the band chemical potentials. Because
/// the Gaussian-regularized delta is shared between the two signs, the
/// balance ratio `G(−ω)/G(ω) = e^{−(ω−Δμ)/T}` holds exactly on the discrete
/// support regardless of the regularization width.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitonicSpectrum {
    energies_a: Vec<f64>,
    energies_b: Vec<f64>,
    /// `couplings[k][l]` pairs band-a mode `k` with band-b mode `l`.
    couplings: Vec<Vec<f64>>,
    mu_a: f64,
    mu_b: f64,
    temperature: f64,
    delta_width: f64,
}

impl ExcitonicSpectrum {
    pub fn new(
        energies_a: Vec<f64>,
        energies_b: Vec<f64>,
        couplings: Vec<Vec<f64>>,
        mu_a: f64,
        mu_b: f64,
        temperature: f64,
        delta_width: f64,
    ) -> Result<Self> {
        if energies_a.is_empty() || energies_b.is_empty() {
            return Err(Error::InvariantViolation {
                what: "excitonic spectrum needs at least one mode per band".into(),
            });
        }
        if couplings.len() != energies_a.len()
            || couplings.iter().any(|row| row.len() != energies_b.len())
        {
            return Err(Error::ShapeMismatch {
                context: "excitonic couplings",
                expected: format!("{}x{}", energies_a.len(), energies_b.len()),
                got: format!(
                    "{} rows, first row {}",
                    couplings.len(),
                    couplings.first().map_or(0, Vec::len)
                ),
            });
        }
        let finite = energies_a.iter().chain(&energies_b).all(|e| e.is_finite())
            && couplings.iter().flatten().all(|g| g.is_finite())
            && mu_a.is_finite()
            && mu_b.is_finite();
        if !finite || !(temperature > 0.0) || !(delta_width > 0.0) {
            return Err(Error::InvariantViolation {
                what: "excitonic spectrum needs finite data, T > 0 and η > 0".into(),
            });
        }
        Ok(Self {
            energies_a,
            energies_b,
            couplings,
            mu_a,
            mu_b,
            temperature,
            delta_width,
        })
    }

    /// Chemical-potential difference `Δμ = μ_a − μ_b` entering the balance law.
    pub fn delta_mu(&self) -> f64 {
        self.mu_a - self.mu_b
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    fn eval(&self, omega: f64) -> f64 {
        // Both signs share the delta support at E_a(k) − E_b(ℓ) = |ω|; only
        // the occupation factors swap.
        let support = omega.abs();
        let mut total = 0.0;
        for (k, &ea) in self.energies_a.iter().enumerate() {
            let fa = fermi_occupation(ea, self.mu_a, self.temperature);
            for (l, &eb) in self.energies_b.iter().enumerate() {
                let fb = fermi_occupation(eb, self.mu_b, self.temperature);
                let occupation = if omega >= 0.0 {
                    fb * (1.0 - fa)
                } else {
                    fa * (1.0 - fb)
                };
                let g2 = self.couplings[k][l] * self.couplings[k][l];
                total += g2 * gaussian_delta(ea - eb - support, self.delta_width) * occupation;
            }
        }
        total
    }
}

/// Spectrum given by `(ω, G)` samples with linear interpolation in between.
///
/// Evaluation outside the sampled range is an error rather than an
/// extrapolation: tabulated data declares no balance law and no tail model.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedSpectrum {
    omegas: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedSpectrum {
    /// Builds a table from `(ω, G)` pairs. The pairs are sorted by `ω`;
    /// duplicate frequencies, non-finite entries, negative values, or fewer
    /// than two points are rejected.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvariantViolation {
                what: "tabulated spectrum needs at least two sample points".into(),
            });
        }
        if points
            .iter()
            .any(|&(w, g)| !w.is_finite() || !g.is_finite() || g < 0.0)
        {
            return Err(Error::InvariantViolation {
                what: "tabulated spectrum entries must be finite with G ≥ 0".into(),
            });
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvariantViolation {
                what: "tabulated spectrum has duplicate frequency samples".into(),
            });
        }
        let (omegas, values) = points.into_iter().unzip();
        Ok(Self { omegas, values })
    }

    /// Parses two-column CSV text (`ω,G` per line). `#`-comments and blank
    /// lines are skipped, and a single non-numeric header row is tolerated.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut header_allowed = true;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::Config(format!(
                    "spectrum CSV line {}: expected two comma-separated columns, got {}",
                    idx + 1,
                    fields.len()
                )));
            }
            match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
                (Ok(w), Ok(g)) => {
                    points.push((w, g));
                    header_allowed = false;
                }
                _ if header_allowed => {
                    header_allowed = false;
                }
                _ => {
                    return Err(Error::Config(format!(
                        "spectrum CSV line {}: cannot parse '{}' as numbers",
                        idx + 1,
                        line
                    )));
                }
            }
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    /// Sampled frequency range `[ω_min, ω_max]`.
    pub fn range(&self) -> (f64, f64) {
        (self.omegas[0], *self.omegas.last().unwrap())
    }

    fn eval(&self, omega: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if omega < lo || omega > hi {
            return Err(Error::Extrapolation {
                what: format!("ω = {omega} outside tabulated range [{lo}, {hi}]"),
            });
        }
        // Index of the first sample point strictly above ω; ω = ω_max lands
        // in the last panel.
        let j = self
            .omegas
            .partition_point(|&w| w <= omega)
            .clamp(1, self.omegas.len() - 1);
        let (w0, w1) = (self.omegas[j - 1], self.omegas[j]);
        let (g0, g1) = (self.values[j - 1], self.values[j]);
        Ok(g0 + (g1 - g0) * (omega - w0) / (w1 - w0))
    }
}

/// A coupling spectrum `G(ω)` with a declared detailed-balance law.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpectrum {
    /// Equilibrium bath at temperature `T ≥ 0`; `T = 0` switches off all
    /// upward rates.
    Thermal {
        profile: RateProfile,
        temperature: f64,
    },
    /// Grand-canonical reservoir of reacting species: each downward step of
    /// the system accompanies one reaction step that releases Gibbs free
    /// energy `Δg`, so transitions balance at `e^{−(ω−Δg)/T₁}`.
    Chemical {
        profile: RateProfile,
        t1: f64,
        delta_g: f64,
    },
    /// Two-band fermionic reservoir; see [`ExcitonicSpectrum`].
    Excitonic(ExcitonicSpectrum),
    /// Interpolated `(ω, G)` samples; see [`TabulatedSpectrum`].
    Tabulated(TabulatedSpectrum),
}

impl CouplingSpectrum {
    /// Evaluates `G(ω)` at a signed transition frequency.
    ///
    /// Only the [`CouplingSpectrum::Tabulated`] variant can fail, when `ω`
    /// falls outside the sampled range.
    pub fn eval(&self, omega: f64) -> Result<f64> {
        match self {
            CouplingSpectrum::Thermal {
                profile,
                temperature,
            } => {
                if omega >= 0.0 {
                    Ok(profile.eval(omega))
                } else {
                    Ok(boltzmann(-omega, *temperature) * profile.eval(-omega))
                }
            }
            CouplingSpectrum::Chemical {
                profile,
                t1,
                delta_g,
            } => {
                if omega >= 0.0 {
                    Ok(profile.eval(omega))
                } else {
                    Ok(boltzmann(-omega - delta_g, *t1) * profile.eval(-omega))
                }
            }
            CouplingSpectrum::Excitonic(ex) => Ok(ex.eval(omega)),
            CouplingSpectrum::Tabulated(tab) => tab.eval(omega),
        }
    }

    /// The detailed-balance factor `G(−ω)/G(ω)` implied by the variant:
    /// `e^{−ω/T}` (thermal), `e^{−(ω−Δg)/T₁}` (chemical), `e^{−(ω−Δμ)/T}`
    /// (excitonic). Tabulated spectra declare no balance law and return
    /// `None`. At `T = 0` the factor is 0 on the loss side and `+∞` on the
    /// gain side.
    pub fn balance_factor(&self, omega: f64) -> Option<f64> {
        match self {
            CouplingSpectrum::Thermal { temperature, .. } => Some(boltzmann(omega, *temperature)),
            CouplingSpectrum::Chemical { t1, delta_g, .. } => {
                Some(boltzmann(omega - delta_g, *t1))
            }
            CouplingSpectrum::Excitonic(ex) => {
                Some(boltzmann(omega - ex.delta_mu(), ex.temperature))
            }
            CouplingSpectrum::Tabulated(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CouplingSpectrum::Thermal {
                profile,
                temperature,
            } => {
                profile.validate()?;
                if !(temperature.is_finite() && *temperature >= 0.0) {
                    return Err(Error::InvariantViolation {
                        what: format!("thermal spectrum needs T ≥ 0, got {temperature}"),
                    });
                }
                Ok(())
            }
            CouplingSpectrum::Chemical {
                profile,
                t1,
                delta_g,
            } => {
                profile.validate()?;
                if !(t1.is_finite() && *t1 > 0.0 && delta_g.is_finite()) {
                    return Err(Error::InvariantViolation {
                        what: format!("chemical spectrum needs T₁ > 0, got T₁ = {t1}"),
                    });
                }
                Ok(())
            }
            // Both carry validated state by construction.
            CouplingSpectrum::Excitonic(_) | CouplingSpectrum::Tabulated(_) => Ok(()),
        }
    }
}
