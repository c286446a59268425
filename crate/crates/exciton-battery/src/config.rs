//! TOML scenario configuration for the `simulate` binary.
//!
//! One file describes one scenario, the physical parameters it needs, and an
//! optional list of parameter sweeps:
//!
//! ```toml
//! version = 1
//! scenario = "battery-steady"
//! id = "bias-scan"
//!
//! [battery]
//! delta_mu = 1.0
//! fock_levels = 40
//!
//! [[sweep]]
//! parameter = "battery.xi0"
//! values = [0.0, 0.8, 1.5]
//! ```
//!
//! Unknown keys are rejected everywhere. Every sweep point is resolved and
//! checked against the module invariants *before* any evaluation starts, so
//! a bad config never produces partial outputs. Sweeps combine as a
//! cartesian product with the first-declared sweep outermost; the flat
//! `sweep_index` enumerates that product in declaration order.
//!
//! Scenario kinds and the sections they read:
//!
//! | `scenario`        | required   | optional                 |
//! |-------------------|------------|--------------------------|
//! | `battery-steady`  | —          | `[battery]`, `[spectrum]` |
//! | `battery-evolve`  | `[evolve]` | `[battery]`, `[spectrum]` |
//! | `discharge-rate`  | —          | `[battery]`, `[spectrum]` |
//! | `ergotropy`       | —          | `[battery]`              |
//! | `exciton-factory` | `[exciton]`| —                        |
//! | `rwc-compare`     | `[rwc]`    | —                        |
//!
//! Sections a scenario does not read are rejected, for the same reason
//! unknown keys are: a config that says something the run ignores is a
//! config that lies about what happened.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::battery::{
    canonical_charging_spectrum, canonical_discharge_spectrum, truncation_guard,
};
use crate::cumulant::BathCorrelation;
use crate::error::{Error, Result};
use crate::exciton::{ExcitonFactoryParams, HotTemperature, MAX_FACTORY_MODES};
use crate::operators::BatteryParams;
use crate::spectra::{CouplingSpectrum, RateProfile, TabulatedSpectrum};

/// Schema version this build reads; configs must carry `version = 1`.
pub const CONFIG_VERSION: u64 = 1;

// ---------------------------------------------------------------------------
// Raw TOML mirror types.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u64,
    scenario: String,
    id: String,
    #[serde(default)]
    seed: u64,
    battery: Option<RawBattery>,
    spectrum: Option<RawSpectrum>,
    evolve: Option<RawEvolve>,
    exciton: Option<RawExciton>,
    rwc: Option<RawRwc>,
    #[serde(default)]
    sweep: Vec<RawSweep>,
    #[serde(default)]
    tolerances: Tolerances,
}

/// Mirror of [`BatteryParams`]; omitted keys fall back to the defaults of
/// that type, so a config only states what it changes.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawBattery {
    omega0: Option<f64>,
    xi0: Option<f64>,
    e_el: Option<f64>,
    temperature: Option<f64>,
    delta_mu: Option<f64>,
    fock_levels: Option<usize>,
    gamma: Option<f64>,
    g1_at_zero: Option<f64>,
    g2_at_zero: Option<f64>,
    gamma_ex: Option<f64>,
}

impl RawBattery {
    fn resolve(&self) -> BatteryParams {
        let d = BatteryParams::default();
        BatteryParams {
            omega0: self.omega0.unwrap_or(d.omega0),
            xi0: self.xi0.unwrap_or(d.xi0),
            e_el: self.e_el.unwrap_or(d.e_el),
            temperature: self.temperature.unwrap_or(d.temperature),
            delta_mu: self.delta_mu.unwrap_or(d.delta_mu),
            fock_levels: self.fock_levels.unwrap_or(d.fock_levels),
            gamma: self.gamma.unwrap_or(d.gamma),
            g1_at_zero: self.g1_at_zero.unwrap_or(d.g1_at_zero),
            g2_at_zero: self.g2_at_zero.unwrap_or(d.g2_at_zero),
            gamma_ex: self.gamma_ex.unwrap_or(d.gamma_ex),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    kind: String,
    rate: Option<f64>,
    coupling: Option<f64>,
    cutoff: Option<f64>,
    peak_rate: Option<f64>,
    center: Option<f64>,
    width: Option<f64>,
    temperature: Option<f64>,
    t1: Option<f64>,
    delta_g: Option<f64>,
    path: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvolve {
    t_final: f64,
    checkpoints: usize,
    initial: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExciton {
    band_a: Vec<f64>,
    band_b: Vec<f64>,
    gamma_a: Option<Vec<Vec<f64>>>,
    gamma_b: Option<Vec<Vec<f64>>>,
    gamma_inter: Option<Vec<Vec<f64>>>,
    /// Shorthand: fill both intraband matrices with this rate (zero
    /// diagonal). Mutually exclusive with `gamma_a`/`gamma_b`.
    gamma_intra: Option<f64>,
    /// Shorthand: fill the interband matrix uniformly. Mutually exclusive
    /// with `gamma_inter`.
    gamma_cross: Option<f64>,
    temperature: f64,
    t_hot: Option<f64>,
    hot_table: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    delta_g: f64,
    grid_min: f64,
    grid_max: f64,
    grid_points: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRwc {
    level_splitting: f64,
    amplitude: f64,
    decay: f64,
    #[serde(default)]
    frequency: f64,
    kms_temperature: Option<f64>,
    lambda: f64,
    times: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    parameter: String,
    values: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Resolved config.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Kernel of the full charging generator vs. the closed-form steady
    /// state.
    BatterySteady,
    /// Checkpointed relaxation of a chosen initial state.
    BatteryEvolve,
    /// Ground-branch drain rate of the charged cell, four routes.
    DischargeRate,
    /// Extractable-work bounds of the battery steady state.
    Ergotropy,
    /// Residual-minimizing bias of a two-band exciton reservoir vs. the
    /// closed-form prediction.
    ExcitonFactory,
    /// Finite-time refined map against its Markovian limit.
    RwcCompare,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::BatterySteady => "battery-steady",
            ScenarioKind::BatteryEvolve => "battery-evolve",
            ScenarioKind::DischargeRate => "discharge-rate",
            ScenarioKind::Ergotropy => "ergotropy",
            ScenarioKind::ExcitonFactory => "exciton-factory",
            ScenarioKind::RwcCompare => "rwc-compare",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "battery-steady" => ScenarioKind::BatterySteady,
            "battery-evolve" => ScenarioKind::BatteryEvolve,
            "discharge-rate" => ScenarioKind::DischargeRate,
            "ergotropy" => ScenarioKind::Ergotropy,
            "exciton-factory" => ScenarioKind::ExcitonFactory,
            "rwc-compare" => ScenarioKind::RwcCompare,
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario '{other}' (expected battery-steady, \
                     battery-evolve, discharge-rate, ergotropy, \
                     exciton-factory, or rwc-compare)"
                )));
            }
        })
    }

    fn uses_battery(self) -> bool {
        matches!(
            self,
            ScenarioKind::BatterySteady
                | ScenarioKind::BatteryEvolve
                | ScenarioKind::DischargeRate
                | ScenarioKind::Ergotropy
        )
    }

    fn uses_spectrum(self) -> bool {
        matches!(
            self,
            ScenarioKind::BatterySteady
                | ScenarioKind::BatteryEvolve
                | ScenarioKind::DischargeRate
        )
    }
}

/// Bath spectrum selection for the battery scenarios.
///
/// `Canonical` re-derives the spectrum from the battery parameters at every
/// sweep point (charging scenarios get the narrow excitonic line at the gap,
/// the discharge scenario gets the Ohmic ambient bath), so it tracks swept
/// parameters. Explicit spectra are fixed once at parse time.
#[derive(Clone, Debug)]
pub enum SpectrumSpec {
    Canonical,
    Explicit(CouplingSpectrum),
}

/// Which reservoir the scenario couples to the electronic transition.
#[derive(Clone, Copy, Debug)]
pub enum SpectrumRole {
    Charging,
    Discharging,
}

impl SpectrumSpec {
    pub fn build(&self, p: &BatteryParams, role: SpectrumRole) -> CouplingSpectrum {
        match self {
            SpectrumSpec::Canonical => match role {
                SpectrumRole::Charging => canonical_charging_spectrum(p),
                SpectrumRole::Discharging => canonical_discharge_spectrum(p),
            },
            SpectrumSpec::Explicit(s) => s.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    /// Conditioned Gibbs state on the ground electronic branch.
    Discharged,
    /// Conditioned Gibbs state on the excited branch.
    Charged,
    /// The closed-form steady state itself (a fixed-point check).
    Stationary,
}

#[derive(Clone, Copy, Debug)]
pub struct EvolveSpec {
    pub t_final: f64,
    /// Number of equal steps; the run records `checkpoints + 1` states
    /// including t = 0.
    pub checkpoints: usize,
    pub initial: InitialState,
}

#[derive(Clone, Debug)]
pub struct RwcSpec {
    pub level_splitting: f64,
    pub amplitude: f64,
    pub decay: f64,
    pub frequency: f64,
    pub kms_temperature: Option<f64>,
    /// Coupling strength λ entering the refined map `exp(λ²K⁽²⁾(t))`.
    pub lambda: f64,
    pub times: Vec<f64>,
}

impl RwcSpec {
    pub fn correlation(&self) -> BathCorrelation {
        BathCorrelation::Exponential {
            amplitude: self.amplitude,
            decay: self.decay,
            frequency: self.frequency,
            kms_temperature: self.kms_temperature,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExcitonSpec {
    pub params: ExcitonFactoryParams,
    /// Whether the hot temperature came in as a single scalar (sweepable)
    /// rather than an energy-resolved table.
    pub hot_is_constant: bool,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
}

impl ExcitonSpec {
    /// The Δμ search grid, inclusive of both ends.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        let step = (self.grid_max - self.grid_min) / (n - 1) as f64;
        (0..n).map(|i| self.grid_min + step * i as f64).collect()
    }
}

/// Pass/fail thresholds the runner applies on top of the module invariants.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest acceptable trace distance between the numerically extracted
    /// steady state and its closed form before a `battery-steady` record is
    /// marked failed.
    pub stationary_distance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stationary_distance: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// One point of the cartesian sweep: the flat index plus the `(parameter,
/// value)` assignments that realize it.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, f64)>,
}

/// Everything a single sweep point hands to its evaluator.
#[derive(Clone, Debug)]
pub struct ScenarioInputs {
    pub battery: BatteryParams,
    pub evolve: Option<EvolveSpec>,
    pub exciton: Option<ExcitonSpec>,
    pub rwc: Option<RwcSpec>,
}

/// A parsed, hash-stamped scenario file. Construction only proves the TOML
/// was well-formed; call [`ScenarioConfig::validate`] before dispatch to
/// check every sweep point against the module invariants.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub id: String,
    pub seed: u64,
    pub battery: BatteryParams,
    pub spectrum: SpectrumSpec,
    pub evolve: Option<EvolveSpec>,
    pub exciton: Option<ExcitonSpec>,
    pub rwc: Option<RwcSpec>,
    pub sweeps: Vec<SweepSpec>,
    pub tolerances: Tolerances,
    /// SHA-256 of the raw config bytes; stamped into every record.
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config(&text, path.parent())
}

/// Parses and resolves a config from TOML text. `base_dir` anchors relative
/// paths inside the config (tabulated spectrum files).
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::Config(format!("config parse error:\n{e}")))?;
    if raw.version != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "unsupported config version {} (this build reads version {CONFIG_VERSION})",
            raw.version
        )));
    }
    let kind = ScenarioKind::parse(&raw.scenario)?;
    check_id(&raw.id)?;

    // Reject sections the scenario will not read.
    let unused: &[(&str, bool)] = &[
        ("battery", raw.battery.is_some() && !kind.uses_battery()),
        ("spectrum", raw.spectrum.is_some() && !kind.uses_spectrum()),
        (
            "evolve",
            raw.evolve.is_some() && kind != ScenarioKind::BatteryEvolve,
        ),
        (
            "exciton",
            raw.exciton.is_some() && kind != ScenarioKind::ExcitonFactory,
        ),
        ("rwc", raw.rwc.is_some() && kind != ScenarioKind::RwcCompare),
    ];
    for (name, bad) in unused {
        if *bad {
            return Err(Error::Config(format!(
                "[{name}] is not read by scenario '{}'",
                kind.as_str()
            )));
        }
    }

    let battery = raw
        .battery
        .as_ref()
        .map(RawBattery::resolve)
        .unwrap_or_default();
    let spectrum = match &raw.spectrum {
        Some(s) => resolve_spectrum(s, base_dir)?,
        None => SpectrumSpec::Canonical,
    };
    let evolve = match (&raw.evolve, kind) {
        (Some(e), _) => Some(resolve_evolve(e)?),
        (None, ScenarioKind::BatteryEvolve) => {
            return Err(Error::Config(
                "scenario 'battery-evolve' requires an [evolve] section".into(),
            ));
        }
        (None, _) => None,
    };
    let exciton = match (&raw.exciton, kind) {
        (Some(x), _) => Some(resolve_exciton(x)?),
        (None, ScenarioKind::ExcitonFactory) => {
            return Err(Error::Config(
                "scenario 'exciton-factory' requires an [exciton] section".into(),
            ));
        }
        (None, _) => None,
    };
    let rwc = match (&raw.rwc, kind) {
        (Some(r), _) => Some(resolve_rwc(r)?),
        (None, ScenarioKind::RwcCompare) => {
            return Err(Error::Config(
                "scenario 'rwc-compare' requires an [rwc] section".into(),
            ));
        }
        (None, _) => None,
    };

    let mut sweeps = Vec::with_capacity(raw.sweep.len());
    for s in &raw.sweep {
        if s.values.is_empty() {
            return Err(Error::Config(format!(
                "sweep over '{}' has an empty values list",
                s.parameter
            )));
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "sweep over '{}' contains a non-finite value",
                s.parameter
            )));
        }
        if sweeps
            .iter()
            .any(|prev: &SweepSpec| prev.parameter == s.parameter)
        {
            return Err(Error::Config(format!(
                "parameter '{}' is swept twice",
                s.parameter
            )));
        }
        sweeps.push(SweepSpec {
            parameter: s.parameter.clone(),
            values: s.values.clone(),
        });
    }

    let hash = {
        let mut h = Sha256::new();
        h.update(text.as_bytes());
        format!("{:x}", h.finalize())
    };

    Ok(ScenarioConfig {
        kind,
        id: raw.id,
        seed: raw.seed,
        battery,
        spectrum,
        evolve,
        exciton,
        rwc,
        sweeps,
        tolerances: raw.tolerances,
        hash,
    })
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::Config("id must be nonempty".into()));
    }
    if let Some(c) = id
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')))
    {
        return Err(Error::Config(format!(
            "id may only contain [A-Za-z0-9_.-]; found '{c}'"
        )));
    }
    Ok(())
}

fn resolve_evolve(raw: &RawEvolve) -> Result<EvolveSpec> {
    if !(raw.t_final > 0.0) || !raw.t_final.is_finite() {
        return Err(Error::Config(format!(
            "evolve.t_final must be finite and > 0, got {}",
            raw.t_final
        )));
    }
    if raw.checkpoints == 0 {
        return Err(Error::Config("evolve.checkpoints must be >= 1".into()));
    }
    let initial = match raw.initial.as_deref() {
        None | Some("charged") => InitialState::Charged,
        Some("discharged") => InitialState::Discharged,
        Some("stationary") => InitialState::Stationary,
        Some(other) => {
            return Err(Error::Config(format!(
                "evolve.initial must be charged, discharged, or stationary; got '{other}'"
            )));
        }
    };
    Ok(EvolveSpec {
        t_final: raw.t_final,
        checkpoints: raw.checkpoints,
        initial,
    })
}

fn resolve_rwc(raw: &RawRwc) -> Result<RwcSpec> {
    let spec = RwcSpec {
        level_splitting: raw.level_splitting,
        amplitude: raw.amplitude,
        decay: raw.decay,
        frequency: raw.frequency,
        kms_temperature: raw.kms_temperature,
        lambda: raw.lambda,
        times: raw.times.clone(),
    };
    check_rwc(&spec)?;
    Ok(spec)
}

fn check_rwc(spec: &RwcSpec) -> Result<()> {
    spec.correlation().validate()?;
    if !(spec.level_splitting > 0.0) || !spec.level_splitting.is_finite() {
        return Err(Error::Config(format!(
            "rwc.level_splitting must be finite and > 0, got {}",
            spec.level_splitting
        )));
    }
    if !(spec.lambda > 0.0) || !spec.lambda.is_finite() {
        return Err(Error::Config(format!(
            "rwc.lambda must be finite and > 0, got {}",
            spec.lambda
        )));
    }
    if spec.times.is_empty() {
        return Err(Error::Config("rwc.times must be nonempty".into()));
    }
    if spec.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Config(
            "rwc.times must all be finite and >= 0".into(),
        ));
    }
    Ok(())
}

fn resolve_exciton(raw: &RawExciton) -> Result<ExcitonSpec> {
    let (na, nb) = (raw.band_a.len(), raw.band_b.len());
    let intra = |n: usize, g: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { g }).collect())
            .collect()
    };
    let gamma_a = match (&raw.gamma_a, raw.gamma_intra) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either exciton.gamma_a or exciton.gamma_intra, not both".into(),
            ));
        }
        (Some(m), None) => m.clone(),
        (None, Some(g)) => intra(na, g),
        (None, None) => {
            return Err(Error::Config(
                "exciton needs gamma_a (matrix) or gamma_intra (scalar)".into(),
            ));
        }
    };
    let gamma_b = match (&raw.gamma_b, raw.gamma_intra) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either exciton.gamma_b or exciton.gamma_intra, not both".into(),
            ));
        }
        (Some(m), None) => m.clone(),
        (None, Some(g)) => intra(nb, g),
        (None, None) => {
            return Err(Error::Config(
                "exciton needs gamma_b (matrix) or gamma_intra (scalar)".into(),
            ));
        }
    };
    let gamma_inter = match (&raw.gamma_inter, raw.gamma_cross) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either exciton.gamma_inter or exciton.gamma_cross, not both".into(),
            ));
        }
        (Some(m), None) => m.clone(),
        (None, Some(g)) => vec![vec![g; nb]; na],
        (None, None) => {
            return Err(Error::Config(
                "exciton needs gamma_inter (matrix) or gamma_cross (scalar)".into(),
            ));
        }
    };
    let (hot_temperature, hot_is_constant) = match (raw.t_hot, &raw.hot_table) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either exciton.t_hot or exciton.hot_table, not both".into(),
            ));
        }
        (Some(t), None) => (HotTemperature::constant(t), true),
        (None, Some(tab)) => (HotTemperature::from_table(tab.clone()), false),
        (None, None) => {
            return Err(Error::Config(
                "exciton needs t_hot (scalar) or hot_table (energy/temperature pairs)".into(),
            ));
        }
    };
    let spec = ExcitonSpec {
        params: ExcitonFactoryParams {
            band_a: raw.band_a.clone(),
            band_b: raw.band_b.clone(),
            gamma_a,
            gamma_b,
            gamma_inter,
            temperature: raw.temperature,
            hot_temperature,
            delta_g: raw.delta_g,
        },
        hot_is_constant,
        grid_min: raw.grid_min,
        grid_max: raw.grid_max,
        grid_points: raw.grid_points,
    };
    check_exciton(&spec)?;
    Ok(spec)
}

fn check_exciton(spec: &ExcitonSpec) -> Result<()> {
    spec.params.validate()?;
    let n = spec.params.n_modes();
    if n > MAX_FACTORY_MODES {
        return Err(Error::Config(format!(
            "exciton factory scenarios are dense and limited to {MAX_FACTORY_MODES} modes, got {n}"
        )));
    }
    if spec.grid_points < 3 {
        return Err(Error::Config(
            "exciton.grid_points must be >= 3".into(),
        ));
    }
    if !(spec.grid_max > spec.grid_min)
        || !spec.grid_min.is_finite()
        || !spec.grid_max.is_finite()
    {
        return Err(Error::Config(format!(
            "exciton grid needs finite grid_max > grid_min, got [{}, {}]",
            spec.grid_min, spec.grid_max
        )));
    }
    Ok(())
}

fn resolve_spectrum(raw: &RawSpectrum, base_dir: Option<&Path>) -> Result<SpectrumSpec> {
    // Each kind consumes an exact field set; anything else present is a
    // config error so typos cannot silently fall back to a default.
    let fields: &[(&str, bool)] = &[
        ("rate", raw.rate.is_some()),
        ("coupling", raw.coupling.is_some()),
        ("cutoff", raw.cutoff.is_some()),
        ("peak_rate", raw.peak_rate.is_some()),
        ("center", raw.center.is_some()),
        ("width", raw.width.is_some()),
        ("temperature", raw.temperature.is_some()),
        ("t1", raw.t1.is_some()),
        ("delta_g", raw.delta_g.is_some()),
        ("path", raw.path.is_some()),
    ];
    let expect = |allowed: &[&str]| -> Result<()> {
        for (name, set) in fields {
            if *set && !allowed.contains(name) {
                return Err(Error::Config(format!(
                    "spectrum.{name} is not read by spectrum kind '{}'",
                    raw.kind
                )));
            }
            if !*set && allowed.contains(name) {
                return Err(Error::Config(format!(
                    "spectrum kind '{}' requires spectrum.{name}",
                    raw.kind
                )));
            }
        }
        Ok(())
    };

    let spec = match raw.kind.as_str() {
        "canonical" => {
            expect(&[])?;
            return Ok(SpectrumSpec::Canonical);
        }
        "thermal-flat" => {
            expect(&["rate", "temperature"])?;
            CouplingSpectrum::Thermal {
                profile: RateProfile::Flat {
                    rate: raw.rate.unwrap(),
                },
                temperature: raw.temperature.unwrap(),
            }
        }
        "thermal-ohmic-gaussian" => {
            expect(&["coupling", "cutoff", "temperature"])?;
            CouplingSpectrum::Thermal {
                profile: RateProfile::OhmicGaussian {
                    coupling: raw.coupling.unwrap(),
                    cutoff: raw.cutoff.unwrap(),
                },
                temperature: raw.temperature.unwrap(),
            }
        }
        "thermal-gaussian" => {
            expect(&["peak_rate", "center", "width", "temperature"])?;
            CouplingSpectrum::Thermal {
                profile: RateProfile::Gaussian {
                    peak_rate: raw.peak_rate.unwrap(),
                    center: raw.center.unwrap(),
                    width: raw.width.unwrap(),
                },
                temperature: raw.temperature.unwrap(),
            }
        }
        "chemical-gaussian" => {
            expect(&["peak_rate", "center", "width", "t1", "delta_g"])?;
            CouplingSpectrum::Chemical {
                profile: RateProfile::Gaussian {
                    peak_rate: raw.peak_rate.unwrap(),
                    center: raw.center.unwrap(),
                    width: raw.width.unwrap(),
                },
                t1: raw.t1.unwrap(),
                delta_g: raw.delta_g.unwrap(),
            }
        }
        "tabulated" => {
            expect(&["path"])?;
            let given = Path::new(raw.path.as_deref().unwrap());
            let full = match (given.is_relative(), base_dir) {
                (true, Some(dir)) => dir.join(given),
                _ => given.to_path_buf(),
            };
            CouplingSpectrum::Tabulated(TabulatedSpectrum::from_csv_path(&full)?)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown spectrum kind '{other}' (expected canonical, thermal-flat, \
                 thermal-ohmic-gaussian, thermal-gaussian, chemical-gaussian, or tabulated)"
            )));
        }
    };
    spec.validate()?;
    Ok(SpectrumSpec::Explicit(spec))
}

// ---------------------------------------------------------------------------
// Sweeps.
// ---------------------------------------------------------------------------

impl ScenarioConfig {
    /// Cartesian product of the sweep value lists, first-declared sweep
    /// outermost; an empty sweep list yields the single unmodified point.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let total: usize = self.sweeps.iter().map(|s| s.values.len()).product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut assignments = Vec::with_capacity(self.sweeps.len());
            // Decode the flat index in mixed radix, last sweep fastest.
            let mut stride = total;
            for s in &self.sweeps {
                stride /= s.values.len();
                let pos = rem / stride;
                rem %= stride;
                assignments.push((s.parameter.clone(), s.values[pos]));
            }
            points.push(SweepPoint { index, assignments });
        }
        points
    }

    /// Applies one sweep point's assignments on top of the base parameters.
    pub fn resolve(&self, point: &SweepPoint) -> Result<ScenarioInputs> {
        let mut inputs = ScenarioInputs {
            battery: self.battery,
            evolve: self.evolve,
            exciton: self.exciton.clone(),
            rwc: self.rwc.clone(),
        };
        for (name, value) in &point.assignments {
            apply_assignment(&mut inputs, self.kind, name, *value)?;
        }
        Ok(inputs)
    }

    /// Resolves every sweep point and checks the module invariants, without
    /// evaluating anything. A failure here means no record would have been
    /// produced for *some* point, so the whole run is refused up front.
    pub fn validate(&self) -> Result<()> {
        for point in self.sweep_points() {
            let inputs = self.resolve(&point)?;
            self.check_point(&inputs).map_err(|e| {
                Error::Config(format!(
                    "sweep point {}{}: {e}",
                    point.index,
                    assignment_summary(&point)
                ))
            })?;
        }
        Ok(())
    }

    fn check_point(&self, inputs: &ScenarioInputs) -> Result<()> {
        if self.kind.uses_battery() {
            inputs.battery.validate()?;
            truncation_guard(&inputs.battery)?;
        }
        if self.kind.uses_spectrum() {
            let role = match self.kind {
                ScenarioKind::DischargeRate => SpectrumRole::Discharging,
                _ => SpectrumRole::Charging,
            };
            let spec = self.spectrum.build(&inputs.battery, role);
            spec.validate()?;
            // The sideband sums sample the spectrum out to the edge of the
            // Fock ladder on both signs; a tabulated spectrum that cannot
            // cover that range would fail mid-run, so refuse it here.
            if let CouplingSpectrum::Tabulated(_) = &spec {
                let p = &inputs.battery;
                let reach =
                    p.e_el.abs() + (p.fock_levels as f64 - 2.0) * p.omega0;
                for omega in [-reach, reach] {
                    spec.eval(omega).map_err(|e| {
                        Error::Config(format!(
                            "tabulated spectrum too narrow for the sideband comb: {e}"
                        ))
                    })?;
                }
            }
        }
        if let Some(e) = &inputs.evolve {
            if !(e.t_final > 0.0) {
                return Err(Error::Config(format!(
                    "evolve.t_final must be > 0, got {}",
                    e.t_final
                )));
            }
        }
        if let Some(x) = &inputs.exciton {
            check_exciton(x)?;
        }
        if let Some(r) = &inputs.rwc {
            check_rwc(r)?;
        }
        Ok(())
    }
}

fn assignment_summary(point: &SweepPoint) -> String {
    if point.assignments.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = point
        .assignments
        .iter()
        .map(|(n, v)| format!("{n} = {v}"))
        .collect();
    format!(" ({})", parts.join(", "))
}

fn apply_assignment(
    inputs: &mut ScenarioInputs,
    kind: ScenarioKind,
    name: &str,
    value: f64,
) -> Result<()> {
    let b = &mut inputs.battery;
    let battery_ok = kind.uses_battery();
    match name {
        "battery.omega0" if battery_ok => b.omega0 = value,
        "battery.xi0" if battery_ok => b.xi0 = value,
        "battery.e_el" if battery_ok => b.e_el = value,
        "battery.temperature" if battery_ok => b.temperature = value,
        "battery.delta_mu" if battery_ok => b.delta_mu = value,
        "battery.gamma" if battery_ok => b.gamma = value,
        "battery.g1_at_zero" if battery_ok => b.g1_at_zero = value,
        "battery.g2_at_zero" if battery_ok => b.g2_at_zero = value,
        "battery.gamma_ex" if battery_ok => b.gamma_ex = value,
        "battery.fock_levels" if battery_ok => {
            if value.fract() != 0.0 || !(value >= 2.0) || value > 1e6 {
                return Err(Error::Config(format!(
                    "battery.fock_levels sweep values must be integers >= 2, got {value}"
                )));
            }
            b.fock_levels = value as usize;
        }
        "evolve.t_final" if kind == ScenarioKind::BatteryEvolve => {
            inputs.evolve.as_mut().expect("evolve present").t_final = value;
        }
        "exciton.temperature" | "exciton.t_hot" | "exciton.delta_g"
            if kind == ScenarioKind::ExcitonFactory =>
        {
            let x = inputs.exciton.as_mut().expect("exciton present");
            match name {
                "exciton.temperature" => x.params.temperature = value,
                "exciton.delta_g" => x.params.delta_g = value,
                _ => {
                    if !x.hot_is_constant {
                        return Err(Error::Config(
                            "cannot sweep exciton.t_hot over an energy-resolved hot_table"
                                .into(),
                        ));
                    }
                    x.params.hot_temperature = HotTemperature::constant(value);
                }
            }
        }
        "rwc.level_splitting" | "rwc.amplitude" | "rwc.decay" | "rwc.frequency"
        | "rwc.lambda" | "rwc.kms_temperature"
            if kind == ScenarioKind::RwcCompare =>
        {
            let r = inputs.rwc.as_mut().expect("rwc present");
            match name {
                "rwc.level_splitting" => r.level_splitting = value,
                "rwc.amplitude" => r.amplitude = value,
                "rwc.decay" => r.decay = value,
                "rwc.frequency" => r.frequency = value,
                "rwc.lambda" => r.lambda = value,
                _ => r.kms_temperature = Some(value),
            }
        }
        other => {
            return Err(Error::Config(format!(
                "'{other}' is not a sweepable parameter of scenario '{}'",
                kind.as_str()
            )));
        }
    }
    Ok(())
}
