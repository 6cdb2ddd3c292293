//! Reference checks: each target recomputes a group of published numbers
//! or properties and compares them with a stated tolerance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_state_with, EvolveOptions, Generator};
use crate::effective::{
    acceleration_ratio, baseline_period, effective_two_level, simulate_single_atom, Acceleration,
    PeriodDetection,
};
use crate::error::{Error, Result};
use crate::errors::{
    amplitude_sweep, combined_budget, dephasing_error_from, detuning_sweep, leakage_error,
    noise_integrand, symmetric_grid, BudgetInputs, ErrorOptions, GatePropagator, IntegrandForm,
    JumpKind,
};
use crate::linalg::basis;
use crate::metrics::{
    bell_fidelity, evaluate_gate, lindblad_bell_fidelity, simulate_gate, GateResult, SimOptions,
};
use crate::model::{units, Atoms, GateHamiltonian, GateParams};
use crate::optimizer::{batch_runs, run_ga, GAConfig, Problem, Variant};
use crate::pulses::{pulse_value, GatePulses, PulseSpec};
use crate::scalar::Cplx;
use crate::scenario::{scenario, Scenario, FIG2_PANELS, TABLE_ROWS};

/// Pass rule for a check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// `|m − e| ≤ tol`.
    Absolute(f64),
    /// `|m − e| ≤ tol·|e|`.
    Relative(f64),
    /// `e/f ≤ m ≤ e·f`.
    Factor(f64),
    /// `m ≤ e`.
    AtMost,
    /// `m ≥ e`.
    AtLeast,
    /// `m < e`.
    Below,
    /// `m > e`.
    Above,
    /// `m` rounded to the given number of decimals is `≤ e`.
    AtMostRounded(u32),
}

impl Tolerance {
    pub fn accepts(&self, measured: f64, expected: f64) -> bool {
        if !measured.is_finite() {
            return false;
        }
        match *self {
            Tolerance::Absolute(t) => (measured - expected).abs() <= t,
            Tolerance::Relative(t) => (measured - expected).abs() <= t * expected.abs(),
            Tolerance::Factor(f) => measured >= expected / f && measured <= expected * f,
            Tolerance::AtMost => measured <= expected,
            Tolerance::AtLeast => measured >= expected,
            Tolerance::Below => measured < expected,
            Tolerance::Above => measured > expected,
            Tolerance::AtMostRounded(d) => {
                let s = 10f64.powi(d as i32);
                (measured * s).round() / s <= expected
            }
        }
    }
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Absolute(t) if *t != 0.0 && *t < 1e-3 => write!(f, "±{t:e}"),
            Tolerance::Absolute(t) => write!(f, "±{t}"),
            Tolerance::Relative(t) => write!(f, "±{}%", t * 100.0),
            Tolerance::Factor(x) => write!(f, "×÷{x}"),
            Tolerance::AtMost => f.write_str("≤"),
            Tolerance::AtLeast => f.write_str("≥"),
            Tolerance::Below => f.write_str("<"),
            Tolerance::Above => f.write_str(">"),
            Tolerance::AtMostRounded(d) => write!(f, "≤ ({d} dp)"),
        }
    }
}

/// One measured-vs-expected comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: Tolerance,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, expected: f64, tolerance: Tolerance) -> Self {
        Self {
            name: name.into(),
            measured,
            expected,
            pass: tolerance.accepts(measured, expected),
            tolerance,
        }
    }
}

/// A group of checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Fig2,
    Table1,
    Decay,
    Fig6,
    Feasibility,
    Appendix,
    Fig5,
    Properties,
}

impl Target {
    /// Targets in criterion order.
    pub const ALL: [Target; 8] = [
        Target::Fig2,
        Target::Table1,
        Target::Decay,
        Target::Fig6,
        Target::Feasibility,
        Target::Appendix,
        Target::Fig5,
        Target::Properties,
    ];

    pub fn criterion(self) -> usize {
        Target::ALL.iter().position(|&t| t == self).unwrap_or(0) + 1
    }

    pub fn title(self) -> &'static str {
        match self {
            Target::Fig2 => "single-atom acceleration ratios",
            Target::Table1 => "optimized gate table",
            Target::Decay => "decay decompositions",
            Target::Fig6 => "ancillary error budget",
            Target::Feasibility => "leakage and combined feasibility",
            Target::Appendix => "smooth-amplitude improvement strategies",
            Target::Fig5 => "optimizer run statistics",
            Target::Properties => "property suite",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Fig2 => "fig2",
            Target::Table1 => "table1",
            Target::Decay => "decay",
            Target::Fig6 => "fig6",
            Target::Feasibility => "feasibility",
            Target::Appendix => "appendix",
            Target::Fig5 => "fig5",
            Target::Properties => "properties",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Target::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown reproduce target `{s}`")))
    }
}

/// Settings for the expensive targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproduceOptions {
    /// Independent GA runs per variant.
    pub ga_runs: usize,
    pub ga: GAConfig,
    pub error_samples: usize,
    /// Points on each `|ε|, |η| ≤ 0.02` sweep.
    pub sweep_points: usize,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            ga_runs: 20,
            ga: GAConfig {
                seed: 7,
                ..GAConfig::default()
            },
            error_samples: crate::errors::DEFAULT_SAMPLES,
            sweep_points: 9,
        }
    }
}

/// Checks of one target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub target: Target,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn pass_count(&self) -> usize {
        self.checks.iter().filter(|c| c.pass).count()
    }

    /// Plain-text table.
    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.chars().count()).max().unwrap_or(4).max(5);
        let mut s = format!(
            "{:<w$}  {:>14}  {:>14}  {:>12}  result\n",
            "check", "measured", "expected", "tolerance"
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{:<w$}  {:>14.6e}  {:>14.6e}  {:>12}  {}\n",
                c.name,
                c.measured,
                c.expected,
                c.tolerance.to_string(),
                if c.pass { "pass" } else { "FAIL" }
            ));
        }
        s
    }

    /// CSV with a header row.
    pub fn csv(&self) -> String {
        let mut s = String::from("target,check,measured (check units),expected (check units),tolerance,pass\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{},\"{}\",{},{},{},{}\n",
                self.target, c.name, c.measured, c.expected, c.tolerance, c.pass
            ));
        }
        s
    }
}

pub fn run_target(target: Target, opts: &ReproduceOptions) -> Result<Report> {
    let checks = match target {
        Target::Fig2 => fig2()?,
        Target::Table1 => table1()?,
        Target::Decay => decay()?,
        Target::Fig6 => fig6(opts)?,
        Target::Feasibility => feasibility(opts)?,
        Target::Appendix => appendix()?,
        Target::Fig5 => fig5(opts)?,
        Target::Properties => properties()?,
    };
    Ok(Report { target, checks })
}

/// Simulation time and step count for the acceleration panels.
pub const FIG2_DURATION_US: f64 = 0.8;
pub const FIG2_STEPS: usize = 80_000;

/// Measured acceleration for an acceleration scenario.
pub fn acceleration_for(s: &Scenario) -> Result<Acceleration<f64>> {
    let (params, o1, oc) = s.acceleration_config()?.to_drive::<f64>()?;
    let tr = simulate_single_atom(&params, o1, oc, FIG2_DURATION_US, FIG2_STEPS)?;
    acceleration_ratio(
        &tr,
        baseline_period(&params, o1),
        &PeriodDetection::for_detuning(params.delta_big),
    )
}

fn fig2() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in FIG2_PANELS {
        let s = scenario(name)?;
        let acc = acceleration_for(&s)?;
        if let Some(p) = s.expected.p {
            out.push(Check::new(format!("{name} p"), acc.p, p, Tolerance::Absolute(0.005)));
        }
        if let Some(t) = s.expected.period_us {
            out.push(Check::new(format!("{name} T (us)"), acc.period, t, Tolerance::Absolute(0.003)));
        }
        if let Some(pm) = s.expected.p_max {
            out.push(Check::new(format!("{name} p"), acc.p, pm, Tolerance::AtMost));
        }
    }
    Ok(out)
}

/// Simulates a catalog gate with its tabulated parameters.
pub fn catalog_gate(name: &str) -> Result<(Scenario, GateResult<f64>)> {
    let s = scenario(name)?;
    let r = evaluate_gate(&s.params::<f64>()?, &s.pulses::<f64>()?, None)?;
    Ok((s, r))
}

fn table1() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in TABLE_ROWS {
        let (s, r) = catalog_gate(name)?;
        let e = &s.expected;
        if let Some(f) = e.fidelity {
            out.push(Check::new(format!("{name} F"), r.fidelity_realistic, f, Tolerance::Absolute(0.003)));
        }
        if let Some(x) = e.t_e_ns {
            out.push(Check::new(format!("{name} T_e (ns)"), r.t_e * 1e3, x, Tolerance::Relative(0.1)));
        }
        if let Some(x) = e.t_r_us {
            out.push(Check::new(format!("{name} T_r (us)"), r.t_r, x, Tolerance::Relative(0.1)));
        }
        if let Some(x) = e.t_a_ns {
            out.push(Check::new(format!("{name} T_a (ns)"), r.t_a * 1e3, x, Tolerance::Relative(0.1)));
        }
    }
    Ok(out)
}

fn decay() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in ["I-SA", "I-ASA"] {
        let (s, r) = catalog_gate(name)?;
        if let Some(x) = s.expected.decay_r {
            out.push(Check::new(format!("{name} γ_rT_r"), r.decay_r, x, Tolerance::Relative(0.05)));
        }
        if let Some(x) = s.expected.decay_e {
            out.push(Check::new(format!("{name} γ_eT_e"), r.decay_e, x, Tolerance::Relative(0.05)));
        }
    }
    Ok(out)
}

fn max_abs_excess(curve: &[crate::errors::SweepPoint<f64>]) -> f64 {
    curve.iter().fold(0.0, |m, p| m.max(p.excess.abs()))
}

fn error_opts(opts: &ReproduceOptions) -> ErrorOptions {
    ErrorOptions {
        samples: opts.error_samples,
        ..ErrorOptions::default()
    }
}

/// Dephasing rate used for the reference budget (100 kHz, μs⁻¹).
pub const REFERENCE_GAMMA_D: f64 = 0.1;

fn fig6(opts: &ReproduceOptions) -> Result<Vec<Check>> {
    let grid = symmetric_grid(0.02, opts.sweep_points);
    let mut out = Vec::new();
    for name in ["II-ASA", "III-ASA", "LIM-ASA"] {
        let s = scenario(name)?;
        let p: GateParams<f64> = s.params()?;
        let pulses: GatePulses<f64> = s.pulses()?;
        let amp = max_abs_excess(&amplitude_sweep(&p, &pulses, &grid, None)?);
        let det = max_abs_excess(&detuning_sweep(&p, &pulses, &grid, None)?);
        out.push(Check::new(format!("{name} max ε infidelity"), amp, 1e-3, Tolerance::Below));
        if name == "III-ASA" {
            out.push(Check::new(format!("{name} max η infidelity"), det, 1e-4, Tolerance::Below));
        }
        out.push(Check::new(
            format!("{name} η/ε infidelity ratio"),
            det / amp,
            0.1,
            Tolerance::Factor(3.0),
        ));
        if name != "II-ASA" {
            let prop = GatePropagator::compute(&p, &pulses, &error_opts(opts))?;
            let ed = dephasing_error_from(&prop, JumpKind::Ancilla, REFERENCE_GAMMA_D)?;
            let edp = dephasing_error_from(&prop, JumpKind::Probe, REFERENCE_GAMMA_D)?;
            out.push(Check::new(format!("{name} E_d @100 kHz"), ed, 3e-4, Tolerance::Relative(0.5)));
            out.push(Check::new(format!("{name} E_d' @100 kHz"), edp, 1e-3, Tolerance::Factor(3.0)));
        }
    }
    Ok(out)
}

/// `max_t Ω_eff(t)/2π` in MHz over the gate.
pub fn peak_effective_rabi_mhz(params: &GateParams<f64>, pulses: &GatePulses<f64>) -> Result<f64> {
    let n = crate::pulses::DEFAULT_GRID_POINTS;
    let t_end = pulses.duration();
    let mut best = 0.0f64;
    for k in 0..n {
        let t = t_end * k as f64 / (n - 1) as f64;
        let (o1, oc) = pulses.values(t);
        let (oe, _) = effective_two_level(params, o1, oc)?;
        best = best.max(oe);
    }
    Ok(units::to_mhz(best))
}

fn feasibility(opts: &ReproduceOptions) -> Result<Vec<Check>> {
    let eopts = error_opts(opts);
    let mut out = Vec::new();
    for name in ["III-ASA", "LIM-ASA"] {
        let s = scenario(name)?;
        let p: GateParams<f64> = s.params()?;
        let pulses: GatePulses<f64> = s.pulses()?;
        if let Some(x) = s.expected.e_k {
            let ek = leakage_error(&p.with_leakage(true), &pulses, &eopts)?;
            out.push(Check::new(format!("{name} E_k"), ek, x, Tolerance::Relative(0.1)));
        }
        let inputs = BudgetInputs {
            epsilon: 0.02,
            eta: 0.02,
            gamma_d: units::khz_rate(50.0),
            ..BudgetInputs::default()
        };
        let b = combined_budget(&p, &pulses, &inputs, &eopts)?;
        if let Some(x) = s.expected.combined_fidelity {
            out.push(Check::new(format!("{name} combined F"), b.fidelity, x, Tolerance::Absolute(0.003)));
        }
        if let Some(x) = s.expected.combined_error {
            out.push(Check::new(
                format!("{name} ancillary error"),
                b.ancillary_error,
                x,
                Tolerance::Relative(0.2),
            ));
        }
        if let Some(x) = s.expected.omega_eff_bound_mhz {
            // cap-level evaluation: Ω₁ = 200 MHz, Ω_c = 150 MHz
            let (oe, _) = effective_two_level(&p, units::mhz(200.0), units::mhz(150.0))?;
            out.push(Check::new(
                format!("{name} Ω_eff/2π at caps (MHz)"),
                units::to_mhz(oe),
                x,
                Tolerance::AtMostRounded(2),
            ));
            out.push(Check::new(
                format!("{name} max Ω_eff/2π over pulses (MHz)"),
                peak_effective_rabi_mhz(&p, &pulses)?,
                x,
                Tolerance::AtMostRounded(2),
            ));
        }
    }
    Ok(out)
}

fn appendix() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for name in ["APPX-S1", "APPX-S2"] {
        let (s, r) = catalog_gate(name)?;
        if let Some(x) = s.expected.t_e_ns {
            out.push(Check::new(format!("{name} T_e (ns)"), r.t_e * 1e3, x, Tolerance::Relative(0.1)));
        }
        if let Some(x) = s.expected.decay_e {
            out.push(Check::new(format!("{name} γ_eT_e"), r.decay_e, x, Tolerance::Relative(0.1)));
        }
    }
    Ok(out)
}

/// Batch statistics for the duration-limited SA and ASA searches.
pub fn lim_batches(
    opts: &ReproduceOptions,
) -> Result<(
    crate::optimizer::BatchStatistics<f64>,
    crate::optimizer::BatchStatistics<f64>,
)> {
    let sa = Problem::<f64>::from_scenario(&scenario("LIM-SA")?, Variant::Sa)?;
    let asa = Problem::<f64>::from_scenario(&scenario("LIM-ASA")?, Variant::AsaFree)?;
    let log_run = |tag: &'static str| {
        move |i: usize, r: &crate::optimizer::RunResult<f64>| {
            log::info!("{tag} run {i}: best F = {:.5}", r.best_fidelity());
        }
    };
    let a = batch_runs(&opts.ga, &sa, opts.ga_runs, log_run("SA-LIM"))?;
    let b = batch_runs(&opts.ga, &asa, opts.ga_runs, log_run("ASA-LIM"))?;
    Ok((a, b))
}

fn fig5(opts: &ReproduceOptions) -> Result<Vec<Check>> {
    let (sa, asa) = lim_batches(opts)?;
    Ok(vec![
        Check::new("SA-LIM mean best F", sa.mean, 0.992, Tolerance::AtMost),
        Check::new("ASA-LIM mean best F", asa.mean, 0.990, Tolerance::AtLeast),
        Check::new("ASA-LIM minus SA-LIM mean", asa.mean - sa.mean, 0.0, Tolerance::Above),
    ])
}

fn properties() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let s = scenario("III-ASA")?;
    let p: GateParams<f64> = s.params()?;
    let pulses: GatePulses<f64> = s.pulses()?;

    // state norm over a full gate
    let gen = GateHamiltonian::new(&p, &pulses, Atoms::Two)?;
    let idx = crate::model::computational_indices(&p.scheme())?;
    let steps = crate::metrics::gate_steps(&p, &pulses)?;
    let tr = evolve_state_with(
        &gen,
        &basis(gen.dim(), idx[3]),
        pulses.duration(),
        &EvolveOptions::new(steps),
    )?;
    out.push(Check::new("state norm drift", tr.max_norm_drift, 1e-9, Tolerance::AtMost));

    // Lindblad trace on a short gate
    let short = pulses.rescaled(0.05)?;
    let lb = lindblad_bell_fidelity(&p, &short, None)?;
    out.push(Check::new("Lindblad trace drift", lb.max_trace_drift, 1e-8, Tolerance::AtMost));

    let one = Cplx::new(1.0, 0.0);
    let id = bell_fidelity(&[one; 4])?.fidelity;
    out.push(Check::new("identity fidelity", id, 0.25, Tolerance::Absolute(0.0)));

    let spec = PulseSpec::<f64>::new([17.0, 42.0, 99.0, 150.0], 0.3)?;
    let ends: f64 = pulse_value(&spec, 0.0).abs().max(pulse_value(&spec, 0.3).abs());
    out.push(Check::new("pulse endpoint value", ends, 0.0, Tolerance::Absolute(0.0)));

    let lab = GateParams::<f64>::laboratory();
    let o1 = units::mhz(150.0);
    let (oe0, _) = effective_two_level(&lab, o1, 0.0)?;
    let native = o1 * lab.omega2 / (2.0 * lab.delta_big);
    out.push(Check::new("Ω_eff(Ω_c=0) / native", oe0 / native, 1.0, Tolerance::Absolute(1e-14)));
    let half = GateParams { alpha: 0.5, ..lab.clone() };
    let (oe2, _) = effective_two_level(&half, o1, half.delta_big)?;
    out.push(Check::new("Ω_eff doubling ratio", oe2 / native, 2.0, Tolerance::Absolute(1e-13)));

    let reduced = simulate_gate(&p, &pulses, &SimOptions::default())?.0;
    let full = simulate_gate(
        &p,
        &pulses,
        &SimOptions {
            full_space: true,
            ..SimOptions::default()
        },
    )?
    .0;
    let dev = reduced
        .overlaps
        .iter()
        .zip(&full.overlaps)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        .max((reduced.t_e - full.t_e).abs())
        .max((reduced.t_r - full.t_r).abs())
        .max((reduced.t_a - full.t_a).abs());
    out.push(Check::new("reduced vs full space", dev, 1e-10, Tolerance::AtMost));

    let prop = GatePropagator::compute(&p, &pulses, &ErrorOptions::default())?;
    let e1 = dephasing_error_from(&prop, JumpKind::Ancilla, 0.05)?;
    let e2 = dephasing_error_from(&prop, JumpKind::Ancilla, 0.1)?;
    out.push(Check::new(
        "dephasing linearity |E(2γ) − 2E(γ)|",
        (e2 - 2.0 * e1).abs(),
        f64::EPSILON * e2.abs(),
        Tolerance::AtMost,
    ));
    let mut min = f64::INFINITY;
    for kind in [JumpKind::Ancilla, JumpKind::Probe] {
        let ig = noise_integrand(&prop, &kind.operator(&prop.scheme)?, IntegrandForm::Dephasing)?;
        min = min.min(ig.min());
    }
    out.push(Check::new("min δE(t)", min, 0.0, Tolerance::AtLeast));

    let sa = Problem::<f64>::from_scenario(&scenario("LIM-SA")?, Variant::Sa)?;
    let cfg = GAConfig {
        population: 10,
        generations: 3,
        seed: 99,
        ..GAConfig::default()
    };
    let a = serde_json::to_string(&run_ga(&cfg, &sa)?)?;
    let b = serde_json::to_string(&run_ga(&cfg, &sa)?)?;
    out.push(Check::new("GA same-seed mismatch", f64::from(u8::from(a != b)), 0.0, Tolerance::Absolute(0.0)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_rules() {
        assert!(Tolerance::Absolute(0.005).accepts(0.1032, 0.0991));
        assert!(!Tolerance::Absolute(0.005).accepts(0.105, 0.0991));
        assert!(Tolerance::Relative(0.1).accepts(1.09, 1.0));
        assert!(!Tolerance::Relative(0.1).accepts(0.89, 1.0));
        assert!(Tolerance::Factor(3.0).accepts(0.4e-3, 1e-3));
        assert!(!Tolerance::Factor(3.0).accepts(0.3e-3, 1e-3));
        assert!(Tolerance::AtMostRounded(2).accepts(5.4636, 5.46));
        assert!(!Tolerance::AtMostRounded(2).accepts(5.466, 5.46));
        assert!(!Tolerance::AtMost.accepts(f64::NAN, 1.0));
        assert!(Tolerance::Above.accepts(1e-9, 0.0));
        assert!(!Tolerance::Below.accepts(1.0, 1.0));
    }

    #[test]
    fn target_names() {
        for t in Target::ALL {
            assert_eq!(t.name().parse::<Target>().unwrap(), t);
        }
        assert_eq!(Target::Fig2.criterion(), 1);
        assert_eq!(Target::Properties.criterion(), 8);
        assert!("fig9".parse::<Target>().is_err());
    }

    #[test]
    fn report_rendering() {
        let r = Report {
            target: Target::Fig2,
            checks: vec![
                Check::new("a", 1.0, 1.0, Tolerance::Absolute(0.1)),
                Check::new("b", 2.0, 1.0, Tolerance::Absolute(0.1)),
            ],
        };
        assert!(!r.passed());
        assert_eq!(r.pass_count(), 1);
        assert!(r.table().contains("FAIL"));
        assert_eq!(r.csv().lines().count(), 3);
    }
}
