//! JSON run configuration and scenario resolution.

use std::fs;
use std::path::Path;

use rydberg_asa::optimizer::Variant;
use rydberg_asa::{scenario, Error, GAConfig, Result, Scenario};
use serde::{Deserialize, Serialize};

/// A run configuration file.
///
/// Either `base` names a catalog scenario or `scenario` gives one inline.
/// `overrides` patches the gate of the chosen scenario.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub base: Option<String>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub overrides: GateOverrides,
    #[serde(default)]
    pub ga: Option<GAConfig>,
    #[serde(default)]
    pub variant: Option<Variant>,
    /// RK4 steps for every gate evaluation.
    #[serde(default)]
    pub steps: Option<usize>,
}

/// Field-level changes applied to a gate scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateOverrides {
    pub duration_us: Option<f64>,
    pub alpha: Option<f64>,
    pub delta_opt_mhz: Option<f64>,
    pub blockade_v_mhz: Option<f64>,
    pub include_leakage: Option<bool>,
    pub probe_beta_mhz: Option<[f64; 4]>,
    pub ancilla_beta_mhz: Option<[f64; 4]>,
}

impl GateOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        let name = s.name.clone();
        let g = s
            .gate
            .as_mut()
            .ok_or_else(|| Error::Config(format!("scenario `{name}` has no gate to override")))?;
        if let Some(t) = self.duration_us {
            g.duration_us = t;
        }
        if let Some(a) = self.alpha {
            g.params.alpha = a;
        }
        if let Some(d) = self.delta_opt_mhz {
            g.params.delta_opt_mhz = d;
        }
        if let Some(v) = self.blockade_v_mhz {
            g.params.blockade_v_mhz = v;
        }
        if let Some(l) = self.include_leakage {
            g.params.include_leakage = l;
        }
        if let Some(b) = self.probe_beta_mhz {
            g.probe.beta_mhz = b;
        }
        if let Some(b) = self.ancilla_beta_mhz {
            match g.ancilla.as_mut() {
                Some(a) => a.beta_mhz = b,
                None => {
                    return Err(Error::Config(format!(
                        "scenario `{name}` has no ancilla drive to override"
                    )))
                }
            }
        }
        s.validate()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.base.is_some() == cfg.scenario.is_some() {
            return Err(Error::Config(format!(
                "{}: give exactly one of `base` or `scenario`",
                path.display()
            )));
        }
        Ok(cfg)
    }

    /// The scenario with file overrides applied.
    pub fn resolve(&self) -> Result<Scenario> {
        let mut s = match (&self.base, &self.scenario) {
            (Some(name), None) => scenario(name)?,
            (None, Some(s)) => {
                s.validate()?;
                s.clone()
            }
            _ => return Err(Error::Config("give exactly one of `base` or `scenario`".into())),
        };
        self.overrides.apply(&mut s)?;
        Ok(s)
    }
}

/// Loads `--config` if given, else wraps `--scenario` in a default config.
pub fn select(scenario_name: Option<&str>, config: Option<&Path>) -> Result<RunConfig> {
    match (scenario_name, config) {
        (Some(_), Some(_)) => Err(Error::Config("--scenario and --config are exclusive".into())),
        (None, None) => Err(Error::Config("one of --scenario or --config is required".into())),
        (Some(name), None) => Ok(RunConfig {
            base: Some(name.to_string()),
            ..RunConfig::default()
        }),
        (None, Some(path)) => RunConfig::load(path),
    }
}

/// Parses a rate such as `100kHz`, `0.1MHz` or `2500Hz` into μs⁻¹. A bare
/// number is read as kHz.
pub fn parse_rate(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    let (num, scale) = if let Some(n) = lower.strip_suffix("khz") {
        (n, 1e-3)
    } else if let Some(n) = lower.strip_suffix("mhz") {
        (n, 1.0)
    } else if let Some(n) = lower.strip_suffix("hz") {
        (n, 1e-6)
    } else {
        (lower.as_str(), 1e-3)
    };
    let x: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse rate `{t}` (examples: 100kHz, 0.1MHz, 50)"))?;
    if !x.is_finite() || x < 0.0 {
        return Err(format!("rate `{t}` must be finite and non-negative"));
    }
    Ok(x * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_parse_to_inverse_microseconds() {
        assert_eq!(parse_rate("100kHz").unwrap(), 0.1);
        assert_eq!(parse_rate("0.1MHz").unwrap(), 0.1);
        assert_eq!(parse_rate("50").unwrap(), 0.05);
        assert!((parse_rate("3000 Hz").unwrap() - 3e-3).abs() < 1e-15);
        assert!(parse_rate("fast").is_err());
        assert!(parse_rate("-1kHz").is_err());
    }

    #[test]
    fn overrides_patch_gate() {
        let mut s = scenario("III-ASA").unwrap();
        let o = GateOverrides {
            duration_us: Some(0.25),
            alpha: Some(0.95),
            ..Default::default()
        };
        o.apply(&mut s).unwrap();
        let g = s.gate.unwrap();
        assert_eq!(g.duration_us, 0.25);
        assert_eq!(g.params.alpha, 0.95);
    }

    #[test]
    fn ancilla_override_on_sa_is_rejected() {
        let mut s = scenario("III-SA").unwrap();
        let o = GateOverrides {
            ancilla_beta_mhz: Some([1.0; 4]),
            ..Default::default()
        };
        assert!(matches!(o.apply(&mut s), Err(Error::Config(_))));
    }

    #[test]
    fn config_needs_one_source() {
        let dir = std::env::temp_dir().join(format!("rasa-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.json");
        fs::write(&p, "{}").unwrap();
        assert!(RunConfig::load(&p).is_err());
        fs::write(&p, r#"{"base": "LIM-SA", "ga": {"population": 4}}"#).unwrap();
        let c = RunConfig::load(&p).unwrap();
        assert_eq!(c.ga.as_ref().unwrap().population, 4);
        assert_eq!(c.resolve().unwrap().name, "LIM-SA");
        fs::remove_dir_all(&dir).ok();
    }
}
