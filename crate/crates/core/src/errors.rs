//! Error budget for the ancillary drive: amplitude and detuning deviation
//! sweeps, first-order dephasing and leakage errors, and the combined
//! feasibility estimate.
//!
//! The first-order errors use the interaction-picture noise operator
//! `L(t) = U†(t) L U(t)` restricted to the computational subspace. With
//! `M_q = L U(t)|q⟩` and `A_{q'q} = ⟨q'|U†(t) L U(t)|q⟩` the integrand is
//!
//! ```text
//! δℰ(t) = (1/κ) Σ_q ‖M_q‖² − (Σ |A|² + |Tr A|²) / (κ(κ+1)),   κ = 4.
//! ```
//!
//! Single-atom jumps act on each atom separately (`L⊗I` and `I⊗L`) and the
//! two contributions are summed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_columns, ColumnSample, Generator};
use crate::error::{Error, Result};
use crate::linalg::{basis, inner, norm_sqr, trapezoid, OperatorMatrix};
use crate::metrics::{evaluate_gate, gate_steps, GateResult};
use crate::model::{computational_indices, Atoms, GateHamiltonian, GateParams, Level, LevelScheme};
use crate::pulses::GatePulses;
use crate::scalar::{Cplx, Real};

/// Computational subspace dimension for two qubits.
pub const KAPPA: usize = 4;

/// Default number of propagator samples for the error integrals.
pub const DEFAULT_SAMPLES: usize = 2001;

/// Validity threshold on `γT` for the first-order expansion.
pub const WEAK_DISSIPATION_LIMIT: f64 = 0.1;

/// Which single-atom jump operator to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    /// `|a⟩⟨a| − |e⟩⟨e|`, ancilla laser phase noise.
    Ancilla,
    /// `|1⟩⟨1| − |e⟩⟨e|`, probe laser phase noise.
    Probe,
    /// `|k⟩⟨e|`, scattering into the leakage level.
    Leakage,
}

impl JumpKind {
    pub fn operator<T: Real>(self, scheme: &LevelScheme) -> Result<OperatorMatrix<T>> {
        let d = scheme.dim();
        let e = scheme.require(Level::E)?;
        let proj = |i: usize| OperatorMatrix::<T>::outer_basis(d, i, i);
        Ok(match self {
            JumpKind::Ancilla => &proj(scheme.require(Level::A)?) - &proj(e),
            JumpKind::Probe => &proj(scheme.require(Level::Q1)?) - &proj(e),
            JumpKind::Leakage => OperatorMatrix::outer_basis(d, scheme.require(Level::K)?, e),
        })
    }
}

impl fmt::Display for JumpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JumpKind::Ancilla => "ancilla",
            JumpKind::Probe => "probe",
            JumpKind::Leakage => "leakage",
        })
    }
}

impl FromStr for JumpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ancilla" => Ok(JumpKind::Ancilla),
            "probe" => Ok(JumpKind::Probe),
            "leakage" => Ok(JumpKind::Leakage),
            _ => Err(Error::Config(format!("unknown jump kind `{s}`"))),
        }
    }
}

/// Normalisation of the integrand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandForm {
    /// Three-term form with `1/(κ(κ+1))` on the subtracted terms.
    #[default]
    Dephasing,
    /// Two-term leakage form, `(1/κ)(Σ‖M‖² − Σ|A|²)`.
    LeakagePrinted,
}

/// Numerical settings for the error integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorOptions {
    pub samples: usize,
    /// RK4 steps; `None` uses the gate default.
    pub steps: Option<usize>,
    /// Use the three-term form for leakage too.
    pub leakage_dephasing_form: bool,
}

impl Default for ErrorOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            steps: None,
            leakage_dephasing_form: false,
        }
    }
}

/// Computational columns `U(t)|q⟩` of the two-atom gate propagator.
#[derive(Clone, Debug)]
pub struct GatePropagator<T: Real> {
    pub scheme: LevelScheme,
    pub sample: ColumnSample<T>,
}

impl<T: Real> GatePropagator<T> {
    pub fn compute(params: &GateParams<T>, pulses: &GatePulses<T>, opts: &ErrorOptions) -> Result<Self> {
        params.validate()?;
        pulses.validate()?;
        let scheme = params.scheme();
        let gen = GateHamiltonian::new(params, pulses, Atoms::Two)?;
        let steps = match opts.steps {
            Some(s) => s,
            None => gate_steps(params, pulses)?,
        };
        let n = gen.dim();
        let cols: Vec<_> = computational_indices(&scheme)?
            .iter()
            .map(|&k| basis::<T>(n, k))
            .collect();
        let sample = evolve_columns(&gen, &cols, pulses.duration(), steps, opts.samples)?;
        Ok(Self { scheme, sample })
    }

    pub fn duration(&self) -> T {
        *self.sample.times.last().unwrap_or(&T::zero())
    }
}

/// `δℰ(t)` for each atom on the propagator grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrand<T: Real> {
    pub times: Vec<T>,
    pub atom1: Vec<T>,
    pub atom2: Vec<T>,
}

impl<T: Real> Integrand<T> {
    pub fn total(&self) -> Vec<T> {
        self.atom1.iter().zip(&self.atom2).map(|(a, b)| *a + *b).collect()
    }

    /// `∫ δℰ dt` summed over atoms.
    pub fn integral(&self) -> T {
        let dt = match self.times.len() {
            0 | 1 => T::zero(),
            n => (self.times[n - 1] - self.times[0]) / T::from_usize_lossy(n - 1),
        };
        trapezoid(&self.atom1, dt) + trapezoid(&self.atom2, dt)
    }

    pub fn min(&self) -> T {
        self.atom1
            .iter()
            .chain(&self.atom2)
            .copied()
            .fold(T::infinity(), T::min)
    }
}

fn delta_e<T: Real>(cols: &[Vec<Cplx<T>>], op: &OperatorMatrix<T>, form: IntegrandForm) -> T {
    let kappa = T::from_usize_lossy(KAPPA);
    let m: Vec<Vec<Cplx<T>>> = cols.iter().map(|c| op.apply(c)).collect();
    let sum_m: T = m.iter().map(|v| norm_sqr(v)).sum();
    let mut sum_a = T::zero();
    let mut tr = Cplx::new(T::zero(), T::zero());
    for (qp, u) in cols.iter().enumerate() {
        for (q, mq) in m.iter().enumerate() {
            let a = inner(u, mq);
            sum_a += a.norm_sqr();
            if q == qp {
                tr += a;
            }
        }
    }
    match form {
        IntegrandForm::Dephasing => {
            sum_m / kappa - (sum_a + tr.norm_sqr()) / (kappa * (kappa + T::one()))
        }
        IntegrandForm::LeakagePrinted => (sum_m - sum_a) / kappa,
    }
}

/// Evaluates `δℰ(t)` for a single-atom jump embedded on each atom.
pub fn noise_integrand<T: Real>(
    prop: &GatePropagator<T>,
    single: &OperatorMatrix<T>,
    form: IntegrandForm,
) -> Result<Integrand<T>> {
    let d = prop.scheme.dim();
    if single.dim() != d {
        return Err(Error::InvalidParameter(format!(
            "jump dimension {} does not match scheme dimension {d}",
            single.dim()
        )));
    }
    let id = OperatorMatrix::identity(d);
    let l1 = single.kron(&id);
    let l2 = id.kron(single);
    let (atom1, atom2): (Vec<T>, Vec<T>) = prop
        .sample
        .columns
        .par_iter()
        .map(|cols| (delta_e(cols, &l1, form), delta_e(cols, &l2, form)))
        .unzip();
    Ok(Integrand {
        times: prop.sample.times.clone(),
        atom1,
        atom2,
    })
}

fn check_rate<T: Real>(gamma: T, duration: T, what: &str) -> Result<()> {
    if !gamma.is_finite() || gamma < T::zero() {
        return Err(Error::InvalidParameter(format!("{what} rate must be finite and non-negative")));
    }
    let gt = gamma * duration;
    if gt > T::lit(WEAK_DISSIPATION_LIMIT) {
        log::warn!("{what}: γT = {gt} exceeds {WEAK_DISSIPATION_LIMIT}; first-order estimate unreliable");
    }
    Ok(())
}

/// `γ ∫ δℰ dt` for a dephasing jump on a precomputed propagator.
pub fn dephasing_error_from<T: Real>(prop: &GatePropagator<T>, kind: JumpKind, gamma: T) -> Result<T> {
    check_rate(gamma, prop.duration(), &format!("{kind} dephasing"))?;
    let op = kind.operator::<T>(&prop.scheme)?;
    Ok(gamma * noise_integrand(prop, &op, IntegrandForm::Dephasing)?.integral())
}

/// First-order dephasing error at rate `gamma` (μs⁻¹, no 2π).
pub fn dephasing_error<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    kind: JumpKind,
    gamma: T,
    opts: &ErrorOptions,
) -> Result<T> {
    if kind == JumpKind::Leakage {
        return Err(Error::InvalidParameter("use leakage_error for the leakage jump".into()));
    }
    let prop = GatePropagator::compute(params, pulses, opts)?;
    dephasing_error_from(&prop, kind, gamma)
}

/// Leakage error `bγ_e ∫ δℰ(t, |k⟩⟨e|) dt`.
pub fn leakage_error_from<T: Real>(
    prop: &GatePropagator<T>,
    params: &GateParams<T>,
    opts: &ErrorOptions,
) -> Result<T> {
    if !params.include_leakage || prop.scheme.index(Level::K).is_none() {
        return Err(Error::Unsupported(
            "leakage error requires the leakage level to be enabled".into(),
        ));
    }
    let gamma_k = params.branching_b * params.gamma_e;
    check_rate(gamma_k, prop.duration(), "leakage")?;
    let form = if opts.leakage_dephasing_form {
        IntegrandForm::Dephasing
    } else {
        IntegrandForm::LeakagePrinted
    };
    let op = JumpKind::Leakage.operator::<T>(&prop.scheme)?;
    Ok(gamma_k * noise_integrand(prop, &op, form)?.integral())
}

pub fn leakage_error<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    opts: &ErrorOptions,
) -> Result<T> {
    if !params.include_leakage {
        return Err(Error::Unsupported(
            "leakage error requires the leakage level to be enabled".into(),
        ));
    }
    let prop = GatePropagator::compute(params, pulses, opts)?;
    leakage_error_from(&prop, params, opts)
}

/// One point of a deviation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T: Real> {
    pub deviation: T,
    pub fidelity: T,
    /// `1 − 𝓕`.
    pub infidelity: T,
    /// `𝓕(0) − 𝓕(deviation)`.
    pub excess: T,
}

fn require_ancilla<T: Real>(pulses: &GatePulses<T>) -> Result<()> {
    if pulses.ancilla.is_none() {
        return Err(Error::Unsupported(
            "ancillary deviation sweeps need a gate with an ancilla pulse".into(),
        ));
    }
    Ok(())
}

fn sweep<T: Real>(
    values: &[T],
    eval: impl Fn(T) -> Result<GateResult<T>> + Sync,
) -> Result<Vec<SweepPoint<T>>> {
    let base = eval(T::zero())?.fidelity_ideal;
    values
        .par_iter()
        .map(|&x| {
            let f = if x == T::zero() { base } else { eval(x)?.fidelity_ideal };
            Ok(SweepPoint {
                deviation: x,
                fidelity: f,
                infidelity: T::one() - f,
                excess: base - f,
            })
        })
        .collect()
}

/// Ideal gate fidelity with `Ω_c(t) → (1+ε)Ω_c(t)`, decays off.
pub fn amplitude_sweep<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    epsilons: &[T],
    steps: Option<usize>,
) -> Result<Vec<SweepPoint<T>>> {
    require_ancilla(pulses)?;
    let p = params.without_decay();
    let steps = Some(match steps {
        Some(s) => s,
        None => gate_steps(&p, &pulses.with_ancilla_scale(max_abs(epsilons)))?,
    });
    sweep(epsilons, |e| evaluate_gate(&p, &pulses.with_ancilla_scale(e), steps))
}

/// Ideal gate fidelity with `Δ_c → (1+η)Δ_c`, decays off.
pub fn detuning_sweep<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    etas: &[T],
    steps: Option<usize>,
) -> Result<Vec<SweepPoint<T>>> {
    require_ancilla(pulses)?;
    let p = params.without_decay();
    let steps = Some(match steps {
        Some(s) => s,
        None => gate_steps(&p, pulses)?,
    });
    sweep(etas, |eta| evaluate_gate(&p.with_detuning_deviation(eta), pulses, steps))
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Uniform grid of `n` points on `[-max, max]`.
pub fn symmetric_grid<T: Real>(max: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => (0..n)
            .map(|k| {
                let m = T::from_usize_lossy(n - 1);
                max * (T::from_usize_lossy(2 * k) - m) / m
            })
            .collect(),
    }
}

/// Inputs of a combined budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs<T: Real> {
    pub epsilon: T,
    pub eta: T,
    /// Ancilla dephasing rate (μs⁻¹).
    pub gamma_d: T,
    /// Probe dephasing rate (μs⁻¹).
    pub gamma_d_prime: T,
    pub with_leakage: bool,
}

impl<T: Real> Default for BudgetInputs<T> {
    fn default() -> Self {
        Self {
            epsilon: T::zero(),
            eta: T::zero(),
            gamma_d: T::zero(),
            gamma_d_prime: T::zero(),
            with_leakage: false,
        }
    }
}

/// Combined feasibility estimate.
///
/// `ancillary_error = [F(0,0) − F(ε,η)] + ℰ_d` and
/// `fidelity = F(ε,η) − ℰ_d − ℰ_d′ − ℰ_k`, with `F` the perturbative
/// realistic fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedBudget<T: Real> {
    pub inputs: BudgetInputs<T>,
    pub fidelity_baseline: T,
    pub fidelity_deviated: T,
    pub deviation_error: T,
    pub e_d: T,
    pub e_d_prime: T,
    pub e_k: T,
    pub ancillary_error: T,
    pub fidelity: T,
}

pub fn combined_budget<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    inputs: &BudgetInputs<T>,
    opts: &ErrorOptions,
) -> Result<CombinedBudget<T>> {
    let base = evaluate_gate(params, pulses, opts.steps)?;
    let deviated_params = params.with_detuning_deviation(inputs.eta);
    let deviated_pulses = pulses.with_ancilla_scale(inputs.epsilon);
    let deviated = if inputs.epsilon == T::zero() && inputs.eta == T::zero() {
        base.clone()
    } else {
        evaluate_gate(&deviated_params, &deviated_pulses, opts.steps)?
    };
    let need_prop = inputs.gamma_d > T::zero() || inputs.gamma_d_prime > T::zero() || inputs.with_leakage;
    let (mut e_d, mut e_d_prime, mut e_k) = (T::zero(), T::zero(), T::zero());
    if need_prop {
        let leak_params = deviated_params.with_leakage(inputs.with_leakage);
        let prop = GatePropagator::compute(&leak_params, &deviated_pulses, opts)?;
        if inputs.gamma_d > T::zero() {
            e_d = dephasing_error_from(&prop, JumpKind::Ancilla, inputs.gamma_d)?;
        }
        if inputs.gamma_d_prime > T::zero() {
            e_d_prime = dephasing_error_from(&prop, JumpKind::Probe, inputs.gamma_d_prime)?;
        }
        if inputs.with_leakage {
            e_k = leakage_error_from(&prop, &leak_params, opts)?;
        }
    }
    let deviation_error = base.fidelity_realistic - deviated.fidelity_realistic;
    Ok(CombinedBudget {
        inputs: *inputs,
        fidelity_baseline: base.fidelity_realistic,
        fidelity_deviated: deviated.fidelity_realistic,
        deviation_error,
        e_d,
        e_d_prime,
        e_k,
        ancillary_error: deviation_error + e_d,
        fidelity: deviated.fidelity_realistic - e_d - e_d_prime - e_k,
    })
}

/// Full error report for one gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport<T: Real> {
    pub epsilon_curve: Vec<SweepPoint<T>>,
    pub eta_curve: Vec<SweepPoint<T>>,
    /// `(γ_d, ℰ_d)` pairs.
    pub e_d: Vec<(T, T)>,
    /// `(γ_d′, ℰ_d′)` pairs.
    pub e_d_prime: Vec<(T, T)>,
    pub e_k: Option<T>,
    pub combined: Option<CombinedBudget<T>>,
}

/// Settings for [`error_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest<T: Real> {
    pub epsilons: Vec<T>,
    pub etas: Vec<T>,
    pub gammas: Vec<T>,
    pub leakage: bool,
    pub combined: Option<BudgetInputs<T>>,
}

impl<T: Real> Default for ReportRequest<T> {
    /// `|ε|, |η| ≤ 0.02` on 9 points and `γ ∈ {0, 25, 50, 75, 100}` kHz.
    fn default() -> Self {
        Self {
            epsilons: symmetric_grid(T::lit(0.02), 9),
            etas: symmetric_grid(T::lit(0.02), 9),
            gammas: (0..5).map(|k| T::lit(0.025 * k as f64)).collect(),
            leakage: false,
            combined: None,
        }
    }
}

pub fn error_report<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    req: &ReportRequest<T>,
    opts: &ErrorOptions,
) -> Result<ErrorReport<T>> {
    let epsilon_curve = amplitude_sweep(params, pulses, &req.epsilons, opts.steps)?;
    let eta_curve = detuning_sweep(params, pulses, &req.etas, opts.steps)?;
    let prop = GatePropagator::compute(params, pulses, opts)?;
    let anc = noise_integrand(&prop, &JumpKind::Ancilla.operator(&prop.scheme)?, IntegrandForm::Dephasing)?
        .integral();
    let probe = noise_integrand(&prop, &JumpKind::Probe.operator(&prop.scheme)?, IntegrandForm::Dephasing)?
        .integral();
    let mut e_d = Vec::with_capacity(req.gammas.len());
    let mut e_d_prime = Vec::with_capacity(req.gammas.len());
    for &g in &req.gammas {
        check_rate(g, prop.duration(), "dephasing")?;
        e_d.push((g, g * anc));
        e_d_prime.push((g, g * probe));
    }
    let e_k = if req.leakage {
        Some(leakage_error(&params.with_leakage(true), pulses, opts)?)
    } else {
        None
    };
    let combined = req
        .combined
        .as_ref()
        .map(|inputs| combined_budget(params, pulses, inputs, opts))
        .transpose()?;
    Ok(ErrorReport {
        epsilon_curve,
        eta_curve,
        e_d,
        e_d_prime,
        e_k,
        combined,
    })
}

/// CSV of a sweep with a unit header.
pub fn sweep_csv<T: Real>(name: &str, curve: &[SweepPoint<T>]) -> String {
    let mut s = format!("{name} (dimensionless),fidelity (dimensionless),infidelity (dimensionless),excess_infidelity (dimensionless)\n");
    for p in curve {
        s.push_str(&format!("{},{},{},{}\n", p.deviation, p.fidelity, p.infidelity, p.excess));
    }
    s
}

/// CSV of `(rate, error)` pairs with the rate in kHz.
pub fn rate_csv<T: Real>(label: &str, rows: &[(T, T)]) -> String {
    let mut s = format!("gamma (kHz),{label} (dimensionless)\n");
    for (g, e) in rows {
        s.push_str(&format!("{},{}\n", g.to_f64_lossy() * 1e3, e));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::units;
    use crate::pulses::PulseSpec;
    use crate::scenario::scenario;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn short_gate() -> (GateParams<f64>, GatePulses<f64>) {
        let p = GateParams {
            alpha: 0.93,
            ..GateParams::laboratory()
        };
        let t = 0.05;
        let pulses = GatePulses::new(
            PulseSpec::new([60.0, 120.0, 150.0, 100.0], t).unwrap(),
            Some(PulseSpec::new([40.0, 100.0, 120.0, 60.0], t).unwrap()),
        )
        .unwrap();
        (p, pulses)
    }

    fn fast() -> ErrorOptions {
        ErrorOptions {
            samples: 401,
            ..ErrorOptions::default()
        }
    }

    #[test]
    fn zero_rate_and_no_drive_give_zero() {
        let (p, pulses) = short_gate();
        assert_eq!(dephasing_error(&p, &pulses, JumpKind::Ancilla, 0.0, &fast()).unwrap(), 0.0);
        let off = GatePulses::new(PulseSpec::off(0.05), Some(PulseSpec::off(0.05))).unwrap();
        let e = dephasing_error(&p, &off, JumpKind::Ancilla, 0.1, &fast()).unwrap();
        assert!(e.abs() < 1e-15, "{e}");
        // L_d' does not annihilate |1⟩: with U = I the integrand is the
        // variance of the diagonal n_1 over the subspace, (1/4)·2 − (2+4)/20 per atom
        let e = dephasing_error(&p, &off, JumpKind::Probe, 1.0, &fast()).unwrap();
        assert_relative_eq!(e, 2.0 * 0.05 * (0.5 - 6.0 / 20.0), max_relative = 1e-12);
    }

    #[test]
    fn integrand_nonnegative_and_swap_symmetric() {
        let (p, pulses) = short_gate();
        let prop = GatePropagator::compute(&p, &pulses, &fast()).unwrap();
        for kind in [JumpKind::Ancilla, JumpKind::Probe] {
            let op = kind.operator(&prop.scheme).unwrap();
            let ig = noise_integrand(&prop, &op, IntegrandForm::Dephasing).unwrap();
            assert!(ig.min() >= -1e-14, "{kind}: {}", ig.min());
            for (a, b) in ig.atom1.iter().zip(&ig.atom2) {
                assert!((a - b).abs() < 1e-10);
            }
            let cumulative: Vec<f64> = (1..ig.times.len())
                .map(|n| trapezoid(&ig.total()[..=n], ig.times[1]))
                .collect();
            assert!(cumulative.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        }
    }

    #[test]
    fn linear_in_rate() {
        let (p, pulses) = short_gate();
        let prop = GatePropagator::compute(&p, &pulses, &fast()).unwrap();
        let a = dephasing_error_from(&prop, JumpKind::Ancilla, 0.05).unwrap();
        let b = dephasing_error_from(&prop, JumpKind::Ancilla, 0.1).unwrap();
        assert_eq!(b, 2.0 * a);
        assert!(a > 0.0);
    }

    #[test]
    fn leakage_equals_branching_times_time_in_e() {
        let (p, pulses) = short_gate();
        let p = p.with_leakage(true);
        let ek = leakage_error(&p, &pulses, &ErrorOptions::default()).unwrap();
        let r = evaluate_gate(&p, &pulses, None).unwrap();
        assert_relative_eq!(ek, p.branching_b * p.gamma_e * r.t_e, max_relative = 2e-3);
        let alt = ErrorOptions {
            leakage_dephasing_form: true,
            ..ErrorOptions::default()
        };
        assert_relative_eq!(leakage_error(&p, &pulses, &alt).unwrap(), ek, max_relative = 1e-10);
        assert!(matches!(
            leakage_error(&p.with_leakage(false), &pulses, &fast()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sample_convergence() {
        let (p, pulses) = short_gate();
        let a = dephasing_error(&p, &pulses, JumpKind::Probe, 0.1, &ErrorOptions::default()).unwrap();
        let b = dephasing_error(
            &p,
            &pulses,
            JumpKind::Probe,
            0.1,
            &ErrorOptions {
                samples: 4001,
                ..ErrorOptions::default()
            },
        )
        .unwrap();
        assert!(((a - b) / b).abs() < 0.01);
    }

    #[test]
    fn sweeps_baseline_and_requirements() {
        let (p, pulses) = short_gate();
        let grid = symmetric_grid(0.02, 5);
        assert_eq!(grid, vec![-0.02, -0.01, 0.0, 0.01, 0.02]);
        let amp = amplitude_sweep(&p, &pulses, &grid, None).unwrap();
        assert_eq!(amp[2].excess, 0.0);
        let base = evaluate_gate(&p, &pulses, None).unwrap().fidelity_ideal;
        assert_relative_eq!(amp[2].fidelity, base, max_relative = 1e-9);
        assert!(amp.iter().all(|s| (s.infidelity - (1.0 - s.fidelity)).abs() < 1e-15));
        let sa = GatePulses::probe_only(pulses.probe.clone());
        assert!(matches!(amplitude_sweep(&p, &sa, &grid, None), Err(Error::Unsupported(_))));
        assert!(matches!(detuning_sweep(&p, &sa, &grid, None), Err(Error::Unsupported(_))));
    }

    #[test]
    fn combined_reduces_to_baseline() {
        let (p, pulses) = short_gate();
        let b = combined_budget(&p, &pulses, &BudgetInputs::default(), &fast()).unwrap();
        let r = evaluate_gate(&p, &pulses, None).unwrap();
        assert_eq!(b.fidelity, r.fidelity_realistic);
        assert_eq!(b.ancillary_error, 0.0);
    }

    #[test]
    fn catalog_gate_dephasing_is_positive() {
        let s = scenario("III-ASA").unwrap();
        let p: GateParams<f64> = s.params().unwrap();
        let e = dephasing_error(&p, &s.pulses().unwrap(), JumpKind::Ancilla, units::khz_rate(100.0), &fast())
            .unwrap();
        assert!(e > 0.0 && e < 1e-2, "{e}");
    }

    #[test]
    fn jump_kind_parse() {
        assert_eq!("Probe".parse::<JumpKind>().unwrap(), JumpKind::Probe);
        assert!("x".parse::<JumpKind>().is_err());
        assert_eq!(JumpKind::Leakage.to_string(), "leakage");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn integrand_nonnegative_for_random_unitaries(seed in any::<u64>()) {
            // random product of constant-H evolutions in the 25-dim space
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let scheme = LevelScheme::standard(false);
            let n = scheme.dim() * scheme.dim();
            let h = OperatorMatrix::<f64>::from_fn(n, |_, _| Cplx::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = &h + &h.adjoint();
            let gen = crate::dynamics::ConstantGenerator::new(h);
            let cols: Vec<_> = computational_indices(&scheme).unwrap().iter().map(|&k| basis::<f64>(n, k)).collect();
            let sample = evolve_columns(&gen, &cols, 1.0, 2000, 11).unwrap();
            let prop = GatePropagator { scheme: scheme.clone(), sample };
            for kind in [JumpKind::Ancilla, JumpKind::Probe] {
                let ig = noise_integrand(&prop, &kind.operator(&scheme).unwrap(), IntegrandForm::Dephasing).unwrap();
                prop_assert!(ig.min() >= -1e-12);
            }
        }
    }
}
