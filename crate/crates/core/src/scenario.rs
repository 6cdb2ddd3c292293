//! Scenario catalog and the JSON configuration schema.
//!
//! Configuration values use laboratory units: frequencies as `X/2π` in MHz,
//! `γ_r` in kHz (no 2π), durations in μs.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{units, GateParams};
use crate::pulses::{GatePulses, PulseSpec, DEFAULT_ORDER};
use crate::scalar::Real;

const BUILTIN: &str = include_str!("../data/scenarios.json");

fn lab() -> GateParams<f64> {
    GateParams::laboratory()
}

fn d_delta_big() -> f64 {
    units::to_mhz(lab().delta_big)
}
fn d_omega2() -> f64 {
    units::to_mhz(lab().omega2)
}
fn d_blockade() -> f64 {
    units::to_mhz(lab().blockade_v)
}
fn d_gamma_e() -> f64 {
    units::to_mhz(lab().gamma_e)
}
fn d_gamma_r() -> f64 {
    units::to_khz_rate(lab().gamma_r)
}
fn d_branching() -> f64 {
    lab().branching_b
}
fn d_cap() -> f64 {
    units::to_mhz(lab().amp_cap_1)
}
fn d_order() -> usize {
    DEFAULT_ORDER
}

/// Static parameters in laboratory units. Missing fields take the
/// laboratory defaults of [`GateParams::laboratory`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "d_delta_big")]
    pub delta_big_mhz: f64,
    #[serde(default = "d_omega2")]
    pub omega2_mhz: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub delta_opt_mhz: f64,
    #[serde(default = "d_blockade")]
    pub blockade_v_mhz: f64,
    #[serde(default = "d_gamma_e")]
    pub gamma_e_mhz: f64,
    #[serde(default = "d_gamma_r")]
    pub gamma_r_khz: f64,
    #[serde(default = "d_branching")]
    pub branching_b: f64,
    #[serde(default)]
    pub include_leakage: bool,
    #[serde(default = "d_cap")]
    pub amp_cap_1_mhz: f64,
    #[serde(default = "d_cap")]
    pub amp_cap_c_mhz: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl ParamsConfig {
    pub fn to_params<T: Real>(&self) -> Result<GateParams<T>> {
        let p = GateParams {
            delta_big: units::mhz(T::lit(self.delta_big_mhz)),
            omega2: units::mhz(T::lit(self.omega2_mhz)),
            alpha: T::lit(self.alpha),
            delta_opt: units::mhz(T::lit(self.delta_opt_mhz)),
            blockade_v: units::mhz(T::lit(self.blockade_v_mhz)),
            gamma_e: units::mhz(T::lit(self.gamma_e_mhz)),
            gamma_r: units::khz_rate(T::lit(self.gamma_r_khz)),
            branching_b: T::lit(self.branching_b),
            include_leakage: self.include_leakage,
            amp_cap_1: units::mhz(T::lit(self.amp_cap_1_mhz)),
            amp_cap_c: units::mhz(T::lit(self.amp_cap_c_mhz)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_params<T: Real>(p: &GateParams<T>) -> Self {
        Self {
            delta_big_mhz: units::to_mhz(p.delta_big).to_f64_lossy(),
            omega2_mhz: units::to_mhz(p.omega2).to_f64_lossy(),
            alpha: p.alpha.to_f64_lossy(),
            delta_opt_mhz: units::to_mhz(p.delta_opt).to_f64_lossy(),
            blockade_v_mhz: units::to_mhz(p.blockade_v).to_f64_lossy(),
            gamma_e_mhz: units::to_mhz(p.gamma_e).to_f64_lossy(),
            gamma_r_khz: units::to_khz_rate(p.gamma_r).to_f64_lossy(),
            branching_b: p.branching_b.to_f64_lossy(),
            include_leakage: p.include_leakage,
            amp_cap_1_mhz: units::to_mhz(p.amp_cap_1).to_f64_lossy(),
            amp_cap_c_mhz: units::to_mhz(p.amp_cap_c).to_f64_lossy(),
        }
    }
}

/// Bernstein coefficients of one shaped laser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub beta_mhz: [f64; 4],
    #[serde(default = "d_order")]
    pub order_n: usize,
}

/// A gate: parameters, duration and pulse coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    #[serde(default)]
    pub params: ParamsConfig,
    pub duration_us: f64,
    pub probe: PulseConfig,
    #[serde(default)]
    pub ancilla: Option<PulseConfig>,
}

impl GateConfig {
    pub fn to_params<T: Real>(&self) -> Result<GateParams<T>> {
        self.params.to_params()
    }

    pub fn to_pulses<T: Real>(&self) -> Result<GatePulses<T>> {
        let t = T::lit(self.duration_us);
        let spec = |c: &PulseConfig| PulseSpec::with_order(c.beta_mhz.map(T::lit), c.order_n, t);
        GatePulses::new(spec(&self.probe)?, self.ancilla.as_ref().map(spec).transpose()?)
    }

    pub fn is_accelerated(&self) -> bool {
        self.ancilla.is_some()
    }
}

/// Constant-drive single-atom setup, drives given as fractions of Δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelerationConfig {
    pub delta_big_mhz: f64,
    pub omega1_ratio: f64,
    pub omega2_ratio: f64,
    pub omegac_ratio: f64,
    pub alpha: f64,
    #[serde(default)]
    pub delta_opt_mhz: f64,
}

impl AccelerationConfig {
    /// `(params, Ω₁, Ω_c)` in internal units.
    pub fn to_drive<T: Real>(&self) -> Result<(GateParams<T>, T, T)> {
        let d = units::mhz(T::lit(self.delta_big_mhz));
        let params = GateParams {
            delta_big: d,
            omega2: T::lit(self.omega2_ratio) * d,
            alpha: T::lit(self.alpha),
            delta_opt: units::mhz(T::lit(self.delta_opt_mhz)),
            blockade_v: T::zero(),
            ..GateParams::laboratory()
        };
        params.validate()?;
        Ok((params, T::lit(self.omega1_ratio) * d, T::lit(self.omegac_ratio) * d))
    }
}

/// Optimizer search ranges. Missing fields take the table defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    #[serde(default = "SearchSpace::d_duration")]
    pub duration_us: [f64; 2],
    #[serde(default = "SearchSpace::d_beta")]
    pub beta_mhz: [f64; 2],
    #[serde(default = "SearchSpace::d_beta")]
    pub beta_c_mhz: [f64; 2],
    #[serde(default = "SearchSpace::d_delta")]
    pub delta_opt_mhz: [f64; 2],
    #[serde(default = "SearchSpace::d_alpha")]
    pub alpha: [f64; 2],
}

impl SearchSpace {
    fn d_duration() -> [f64; 2] {
        [0.0, 1.0]
    }
    fn d_beta() -> [f64; 2] {
        [0.0, 200.0]
    }
    fn d_delta() -> [f64; 2] {
        [-10.0, 10.0]
    }
    fn d_alpha() -> [f64; 2] {
        [0.9, 1.0]
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

/// Published reference values attached to a scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub fidelity: Option<f64>,
    pub t_e_ns: Option<f64>,
    pub t_r_us: Option<f64>,
    pub t_a_ns: Option<f64>,
    pub decay_e: Option<f64>,
    pub decay_r: Option<f64>,
    pub p: Option<f64>,
    pub p_max: Option<f64>,
    pub period_us: Option<f64>,
    pub e_d: Option<f64>,
    pub e_d_prime: Option<f64>,
    pub e_k: Option<f64>,
    pub combined_fidelity: Option<f64>,
    pub combined_error: Option<f64>,
    pub omega_eff_bound_mhz: Option<f64>,
    pub batch_mean: Option<f64>,
    pub batch_std: Option<f64>,
}

/// What a scenario describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Gate,
    Acceleration,
}

/// One named catalog entry (or a user-supplied config of the same shape).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ScenarioKind,
    /// SA scenario whose probe waveform this accelerated gate rescales.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub gate: Option<GateConfig>,
    #[serde(default)]
    pub acceleration: Option<AccelerationConfig>,
    #[serde(default)]
    pub search: Option<SearchSpace>,
    #[serde(default)]
    pub expected: Expected,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ScenarioKind::Gate => {
                let g = self.gate_config()?;
                g.to_params::<f64>()?;
                g.to_pulses::<f64>()?;
            }
            ScenarioKind::Acceleration => {
                self.acceleration_config()?.to_drive::<f64>()?;
            }
        }
        Ok(())
    }

    pub fn gate_config(&self) -> Result<&GateConfig> {
        self.gate.as_ref().ok_or_else(|| {
            Error::Config(format!("scenario `{}` has no gate definition", self.name))
        })
    }

    pub fn acceleration_config(&self) -> Result<&AccelerationConfig> {
        self.acceleration.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "scenario `{}` has no acceleration definition",
                self.name
            ))
        })
    }

    pub fn params<T: Real>(&self) -> Result<GateParams<T>> {
        self.gate_config()?.to_params()
    }

    pub fn pulses<T: Real>(&self) -> Result<GatePulses<T>> {
        self.gate_config()?.to_pulses()
    }

    pub fn is_accelerated(&self) -> bool {
        self.gate.as_ref().is_some_and(GateConfig::is_accelerated)
    }

    pub fn search_space(&self) -> SearchSpace {
        self.search.clone().unwrap_or_default()
    }
}

#[derive(Deserialize)]
struct CatalogFile {
    scenarios: Vec<Scenario>,
}

/// Parses a catalog document `{"scenarios": [...]}`.
pub fn parse_catalog(text: &str) -> Result<Vec<Scenario>> {
    let file: CatalogFile = serde_json::from_str(text)?;
    for s in &file.scenarios {
        s.validate()?;
    }
    Ok(file.scenarios)
}

/// The built-in catalog.
pub fn catalog() -> &'static [Scenario] {
    static CATALOG: OnceLock<Vec<Scenario>> = OnceLock::new();
    CATALOG.get_or_init(|| parse_catalog(BUILTIN).expect("built-in catalog is valid"))
}

/// Looks a scenario up by name (case-insensitive).
pub fn scenario(name: &str) -> Result<Scenario> {
    catalog()
        .iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .cloned()
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

pub fn scenario_names() -> Vec<&'static str> {
    catalog().iter().map(|s| s.name.as_str()).collect()
}

/// Names of the tabulated gate rows, in catalog order.
pub const TABLE_ROWS: [&str; 9] = [
    "I-SA", "I-ASA", "II-SA", "II-ASA", "III-SA", "III-ASA", "LIM-SA", "LIM-ASA", "FAIL",
];

/// Names of the acceleration panels.
pub const FIG2_PANELS: [&str; 4] = ["FIG2-a", "FIG2-b", "FIG2-c", "FIG2-d"];
