//! Bell-state fidelity of the CZ gate, decay-penalised cost and the
//! realistic fidelity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    default_steps, evolve_lindblad, evolve_state_with, DiagonalObservable, EvolveOptions, Generator,
    Jump, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{basis, kron_vec, OperatorMatrix, StateVector};
use crate::model::{
    computational_indices, level_projector, number_operator, Atoms, GateHamiltonian, GateParams,
    Level, LevelScheme,
};
use crate::pulses::GatePulses;
use crate::scalar::{creal, Cplx, Real};

/// Computational input labels in storage order.
pub const INPUT_LABELS: [&str; 4] = ["00", "01", "10", "11"];

/// Levels whose average occupation is tracked during a gate.
pub const TRACKED_LEVELS: [Level; 3] = [Level::E, Level::R, Level::A];

/// Fidelity and phases extracted from the four diagonal overlaps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFidelity<T: Real> {
    pub fidelity: T,
    pub phi01: T,
    pub phi10: T,
    pub phi11: T,
    /// `|arg⟨11|ψ₁₁⟩ - φ₀₁ - φ₁₀ - π|` folded into `[0, π]`.
    pub phase_defect: T,
}

fn fold_angle<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let mut y = x % tau;
    if y > T::PI() {
        y -= tau;
    } else if y < -T::PI() {
        y += tau;
    }
    y.abs()
}

/// Bell-state fidelity from `⟨q|ψ_q⟩`, `q ∈ {00, 01, 10, 11}`.
///
/// Single-qubit phases are absorbed: `φ₀₀`, `φ₀₁`, `φ₁₀` are the measured
/// arguments and the CZ target imposes `φ₁₁ = φ₀₁ + φ₁₀ - φ₀₀ + π`. The gate
/// leaves `|00⟩` untouched, so `φ₀₀ = 0` in practice; keeping it makes the
/// result independent of a global phase.
pub fn bell_fidelity<T: Real>(overlaps: &[Cplx<T>; 4]) -> Result<BellFidelity<T>> {
    for (z, label) in overlaps.iter().zip(INPUT_LABELS) {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite(format!("overlap for |{label}⟩")));
        }
        if z.norm() > T::one() + T::lit(1e-9) {
            return Err(Error::NonPhysical(format!(
                "|⟨{label}|ψ⟩| = {} exceeds 1",
                z.norm()
            )));
        }
    }
    let phi00 = overlaps[0].arg();
    let phi01 = overlaps[1].arg();
    let phi10 = overlaps[2].arg();
    let phi11 = phi01 + phi10 - phi00 + T::PI();
    let rot = |z: Cplx<T>, phi: T| z * Cplx::from_polar(T::one(), -phi);
    let sum = rot(overlaps[0], phi00)
        + rot(overlaps[1], phi01)
        + rot(overlaps[2], phi10)
        + rot(overlaps[3], phi11);
    Ok(BellFidelity {
        fidelity: sum.norm_sqr() / T::lit(16.0),
        phi01,
        phi10,
        phi11,
        phase_defect: fold_angle(overlaps[3].arg() - phi11),
    })
}

/// `𝒥 = 1 - 𝓕 + γ_e T_e + γ_r T_r`.
pub fn cost<T: Real>(fidelity_ideal: T, t_e: T, t_r: T, params: &GateParams<T>) -> T {
    T::one() - fidelity_ideal + params.gamma_e * t_e + params.gamma_r * t_r
}

/// `F = 𝓕 - γ_e T_e - γ_r T_r`.
pub fn perturbative_fidelity<T: Real>(fidelity_ideal: T, t_e: T, t_r: T, params: &GateParams<T>) -> T {
    fidelity_ideal - params.gamma_e * t_e - params.gamma_r * t_r
}

/// How the decay-included fidelity is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityMethod {
    #[default]
    Perturbative,
    Lindblad,
}

impl FromStr for FidelityMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "perturbative" => Ok(Self::Perturbative),
            "lindblad" => Ok(Self::Lindblad),
            other => Err(Error::InvalidParameter(format!(
                "unknown fidelity method `{other}` (expected perturbative or lindblad)"
            ))),
        }
    }
}

impl fmt::Display for FidelityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Perturbative => "perturbative",
            Self::Lindblad => "lindblad",
        })
    }
}

/// Outcome of one gate evaluation. Times are in μs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateResult<T: Real> {
    pub fidelity_ideal: T,
    pub phi01: T,
    pub phi10: T,
    pub phi11: T,
    pub phase_defect: T,
    pub t_e: T,
    pub t_r: T,
    pub t_a: T,
    /// `γ_e T_e`.
    pub decay_e: T,
    /// `γ_r T_r`.
    pub decay_r: T,
    pub fidelity_realistic: T,
    pub fidelity_method: FidelityMethod,
    pub cost_j: T,
    /// `⟨q|ψ_q(T)⟩` in [`INPUT_LABELS`] order.
    pub overlaps: [Cplx<T>; 4],
    pub duration: T,
    pub steps: usize,
    pub max_norm_drift: T,
}

/// Integration settings for [`simulate_gate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// RK4 steps; `None` selects [`default_steps`].
    pub steps: Option<usize>,
    /// Evolve `|01⟩` and `|10⟩` in the full product space instead of the
    /// reduced single-atom space.
    pub full_space: bool,
    /// Keep every n-th state in the returned trajectory.
    pub record_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            steps: None,
            full_space: false,
            record_stride: 100,
        }
    }
}

impl SimOptions {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps: Some(steps),
            ..Self::default()
        }
    }
}

/// Step count used for a gate: the two-atom bound dominates.
pub fn gate_steps<T: Real>(params: &GateParams<T>, pulses: &GatePulses<T>) -> Result<usize> {
    let gen = GateHamiltonian::new(params, pulses, Atoms::Two)?;
    Ok(default_steps(pulses.duration(), gen.norm_bound()))
}

fn single_observables<T: Real>(scheme: &LevelScheme) -> Result<Vec<DiagonalObservable<T>>> {
    TRACKED_LEVELS
        .iter()
        .map(|&l| {
            Ok(DiagonalObservable::from_matrix(
                l.label(),
                &level_projector::<T>(scheme, l)?,
            ))
        })
        .collect()
}

fn pair_observables<T: Real>(scheme: &LevelScheme) -> Result<Vec<DiagonalObservable<T>>> {
    TRACKED_LEVELS
        .iter()
        .map(|&l| {
            Ok(DiagonalObservable::from_matrix(
                l.label(),
                &number_operator::<T>(scheme, l)?,
            ))
        })
        .collect()
}

/// Runs the gate dynamics for all four computational inputs.
///
/// `|00⟩` is stationary. `|01⟩`, `|10⟩` evolve one active atom (the other sits
/// in the decoupled `|0⟩`) unless `opts.full_space` is set. The returned
/// trajectory stores product-space states and the average occupations
/// `n̄_ℓ = ¼ Σ_q ⟨ψ_q|n_ℓ|ψ_q⟩` for `ℓ ∈ {e, r, a}`.
pub fn simulate_gate<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    opts: &SimOptions,
) -> Result<(GateResult<T>, Trajectory<T>)> {
    params.validate()?;
    pulses.validate()?;
    let scheme = params.scheme();
    let d = scheme.dim();
    let pair = GateHamiltonian::new(params, pulses, Atoms::Two)?;
    let t_end = pulses.duration();
    let steps = opts
        .steps
        .unwrap_or_else(|| default_steps(t_end, pair.norm_bound()));
    let stride = opts.record_stride.max(1);
    let idx = computational_indices(&scheme)?;
    let q0 = scheme.require(Level::Q0)?;
    let q1 = scheme.require(Level::Q1)?;

    let pair_opts = EvolveOptions {
        steps,
        record_stride: stride,
        observables: pair_observables(&scheme)?,
        label: "11".into(),
    };
    let tr11 = evolve_state_with(&pair, &basis(d * d, idx[3]), t_end, &pair_opts)?;

    let (tr01, tr10, singles_weight) = if opts.full_space {
        let mut o = pair_opts.clone();
        o.label = "01".into();
        let a = evolve_state_with(&pair, &basis(d * d, idx[1]), t_end, &o)?;
        o.label = "10".into();
        let b = evolve_state_with(&pair, &basis(d * d, idx[2]), t_end, &o)?;
        (a, b, T::one())
    } else {
        let single = GateHamiltonian::new(params, pulses, Atoms::One)?;
        let o = EvolveOptions {
            steps,
            record_stride: stride,
            observables: single_observables(&scheme)?,
            label: "1".into(),
        };
        let s = evolve_state_with(&single, &basis(d, q1), t_end, &o)?;
        // lift single-atom states into the product space
        let zero = basis::<T>(d, q0);
        let lift = |tr: &Trajectory<T>, first: bool, label: &str| {
            let mut out = tr.clone();
            out.input_labels = vec![label.to_string()];
            out.states = vec![tr.states[0]
                .iter()
                .map(|s| if first { kron_vec(&zero, s) } else { kron_vec(s, &zero) })
                .collect()];
            out
        };
        (lift(&s, true, "01"), lift(&s, false, "10"), T::one())
    };

    let quarter = T::lit(0.25);
    let mut populations = BTreeMap::new();
    for level in TRACKED_LEVELS {
        let key = level.label();
        let p11 = tr11.population(key)?;
        let p01 = tr01.population(key)?;
        let p10 = tr10.population(key)?;
        let avg: Vec<T> = (0..p11.len())
            .map(|k| quarter * (p11[k] + singles_weight * (p01[k] + p10[k])))
            .collect();
        populations.insert(key.to_string(), avg);
    }

    let zero00 = basis::<T>(d * d, idx[0]);
    let n_states = tr11.states[0].len();
    let traj = Trajectory {
        times: tr11.times.clone(),
        input_labels: INPUT_LABELS.iter().map(|s| s.to_string()).collect(),
        state_steps: tr11.state_steps.clone(),
        states: vec![
            vec![zero00; n_states],
            tr01.states[0].clone(),
            tr10.states[0].clone(),
            tr11.states[0].clone(),
        ],
        populations,
        max_norm_drift: tr11
            .max_norm_drift
            .max(tr01.max_norm_drift)
            .max(tr10.max_norm_drift),
    };
    let result = assemble_result(params, &traj, &idx, t_end, steps)?;
    Ok((result, traj))
}

fn assemble_result<T: Real>(
    params: &GateParams<T>,
    traj: &Trajectory<T>,
    idx: &[usize; 4],
    t_end: T,
    steps: usize,
) -> Result<GateResult<T>> {
    let overlaps: [Cplx<T>; 4] = std::array::from_fn(|q| {
        traj.final_state(q)
            .map_or(Cplx::new(T::zero(), T::zero()), |s| s[idx[q]])
    });
    let bell = bell_fidelity(&overlaps)?;
    let t_e = crate::dynamics::time_in_state(traj, Level::E.label())?;
    let t_r = crate::dynamics::time_in_state(traj, Level::R.label())?;
    let t_a = crate::dynamics::time_in_state(traj, Level::A.label())?;
    Ok(GateResult {
        fidelity_ideal: bell.fidelity,
        phi01: bell.phi01,
        phi10: bell.phi10,
        phi11: bell.phi11,
        phase_defect: bell.phase_defect,
        t_e,
        t_r,
        t_a,
        decay_e: params.gamma_e * t_e,
        decay_r: params.gamma_r * t_r,
        fidelity_realistic: perturbative_fidelity(bell.fidelity, t_e, t_r, params),
        fidelity_method: FidelityMethod::Perturbative,
        cost_j: cost(bell.fidelity, t_e, t_r, params),
        overlaps,
        duration: t_end,
        steps,
        max_norm_drift: traj.max_norm_drift,
    })
}

/// Gate figures of merit with the perturbative realistic fidelity.
pub fn evaluate_gate<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    steps: Option<usize>,
) -> Result<GateResult<T>> {
    let opts = SimOptions {
        steps,
        record_stride: usize::MAX,
        ..SimOptions::default()
    };
    simulate_gate(params, pulses, &opts).map(|(r, _)| r)
}

/// Fills in `fidelity_realistic` with the requested method.
pub fn realistic_fidelity<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    result: &GateResult<T>,
    method: FidelityMethod,
) -> Result<T> {
    match method {
        FidelityMethod::Perturbative => Ok(perturbative_fidelity(
            result.fidelity_ideal,
            result.t_e,
            result.t_r,
            params,
        )),
        FidelityMethod::Lindblad => Ok(lindblad_bell_fidelity(params, pulses, Some(result.steps))?.fidelity),
    }
}

/// Master-equation Bell fidelity and diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladOutcome<T: Real> {
    pub fidelity: T,
    pub max_trace_drift: T,
    /// Population found in the sink level(s) at the end.
    pub lost_population: T,
}

/// Single-atom decay channels: `|e⟩ → dump` at `γ_e(1-b)` and `|e⟩ → |k⟩` at
/// `bγ_e` with leakage, otherwise `|e⟩ → dump` at `γ_e`; `|r⟩ → dump` at `γ_r`.
pub fn decay_channels<T: Real>(
    params: &GateParams<T>,
    scheme: &LevelScheme,
) -> Result<Vec<(T, OperatorMatrix<T>)>> {
    let d = scheme.dim();
    let e = scheme.require(Level::E)?;
    let r = scheme.require(Level::R)?;
    let dump = scheme.require(Level::Dump)?;
    let mut out = Vec::new();
    if params.include_leakage {
        let k = scheme.require(Level::K)?;
        let b = params.branching_b;
        out.push((params.gamma_e * (T::one() - b), OperatorMatrix::outer_basis(d, dump, e)));
        out.push((params.gamma_e * b, OperatorMatrix::outer_basis(d, k, e)));
    } else {
        out.push((params.gamma_e, OperatorMatrix::outer_basis(d, dump, e)));
    }
    out.push((params.gamma_r, OperatorMatrix::outer_basis(d, dump, r)));
    Ok(out)
}

/// Embeds single-atom operators as `L⊗I` and `I⊗L`.
pub fn embed_per_atom<T: Real>(single: &[(T, OperatorMatrix<T>)]) -> Vec<(T, OperatorMatrix<T>)> {
    let mut out = Vec::with_capacity(2 * single.len());
    for (rate, op) in single {
        let id = OperatorMatrix::identity(op.dim());
        out.push((*rate, op.kron(&id)));
        out.push((*rate, id.kron(op)));
    }
    out
}

/// Bell fidelity from a Lindblad evolution of `|++⟩⟨++|` with amplitude
/// decay into a dump level (see [`decay_channels`]).
pub fn lindblad_bell_fidelity<T: Real>(
    params: &GateParams<T>,
    pulses: &GatePulses<T>,
    steps: Option<usize>,
) -> Result<LindbladOutcome<T>> {
    let scheme = LevelScheme::with_dump(params.include_leakage);
    let d = scheme.dim();
    let gen = GateHamiltonian::in_scheme(scheme.clone(), params, pulses, Atoms::Two)?;
    let t_end = pulses.duration();
    let steps = steps.unwrap_or_else(|| default_steps(t_end, gen.norm_bound()));
    let jumps = embed_per_atom(&decay_channels(params, &scheme)?)
        .iter()
        .map(|(g, l)| Jump::new(*g, l))
        .collect::<Result<Vec<_>>>()?;
    let idx = computational_indices(&scheme)?;
    let mut plus = vec![Cplx::new(T::zero(), T::zero()); d];
    let s = T::FRAC_1_SQRT_2();
    plus[scheme.require(Level::Q0)?] = creal(s);
    plus[scheme.require(Level::Q1)?] = creal(s);
    let psi0 = kron_vec(&plus, &plus);
    let rho0 = crate::dynamics::pure_density(&psi0);
    let dens = evolve_lindblad(&gen, &jumps, &rho0, t_end, steps, steps)?;
    let rho = dens.final_density();
    let phi01 = rho[(idx[1], idx[0])].arg();
    let phi10 = rho[(idx[2], idx[0])].arg();
    let phi11 = phi01 + phi10 + T::PI();
    let phases = [T::zero(), phi01, phi10, phi11];
    let mut target: StateVector<T> = vec![Cplx::new(T::zero(), T::zero()); d * d];
    for (q, &k) in idx.iter().enumerate() {
        target[k] = Cplx::from_polar(T::lit(0.5), phases[q]);
    }
    let rt = rho.apply(&target);
    let fidelity = crate::linalg::inner(&target, &rt).re;
    let lost = crate::model::projector::<T>(&scheme, &[Level::Dump.label()], 2)
        .map(|n| (0..d * d).map(|i| n[(i, i)].re * rho[(i, i)].re).sum::<T>())?;
    Ok(LindbladOutcome {
        fidelity,
        max_trace_drift: dens.max_trace_drift,
        lost_population: lost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::units;
    use crate::pulses::PulseSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Cplx<f64> {
        Cplx::new(re, im)
    }

    #[test]
    fn identity_gives_quarter() {
        let one = c(1.0, 0.0);
        let b = bell_fidelity(&[one; 4]).unwrap();
        assert_eq!(b.fidelity, 0.25);
        assert_relative_eq!(b.phase_defect, std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn perfect_cz_with_single_qubit_phase() {
        let phi = 0.731;
        let e = |x: f64| Cplx::from_polar(1.0, x);
        let b = bell_fidelity(&[c(1.0, 0.0), e(phi), e(phi), e(2.0 * phi + std::f64::consts::PI)]).unwrap();
        assert_relative_eq!(b.fidelity, 1.0, epsilon = 1e-14);
        assert!(b.phase_defect < 1e-12);
    }

    #[test]
    fn overlap_above_one_rejected() {
        let r = bell_fidelity(&[c(1.0, 0.0), c(1.01, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(r, Err(Error::NonPhysical(_))));
    }

    #[test]
    fn cost_and_decay_split() {
        let p = GateParams::<f64>::laboratory();
        assert_eq!(cost(1.0, 0.0, 0.0, &p), 0.0);
        let (te, tr) = (0.311e-3, 0.096);
        let decay = cost(1.0, te, tr, &p);
        assert_relative_eq!(decay, 2.243e-3, max_relative = 2e-3);
        let double = cost(1.0, 2.0 * te, 0.0, &p) - cost(1.0, 0.0, 0.0, &p);
        assert_relative_eq!(double, 2.0 * p.gamma_e * te, max_relative = 1e-14);
        let nodecay = p.without_decay();
        assert_eq!(perturbative_fidelity(0.97, te, tr, &nodecay), 0.97);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("Lindblad".parse::<FidelityMethod>().unwrap(), FidelityMethod::Lindblad);
        assert_eq!("perturbative".parse::<FidelityMethod>().unwrap(), FidelityMethod::Perturbative);
        assert!("monte-carlo".parse::<FidelityMethod>().is_err());
    }

    fn short_gate() -> (GateParams<f64>, GatePulses<f64>) {
        let p = GateParams {
            alpha: 0.93,
            delta_opt: units::mhz(-4.0),
            ..GateParams::laboratory()
        };
        let probe = PulseSpec::new([10.0, 25.0, 6.0, 200.0], 0.05).unwrap();
        let anc = PulseSpec::new([0.3, 75.0, 196.0, 60.0], 0.05).unwrap();
        (p, GatePulses::new(probe, Some(anc)).unwrap())
    }

    #[test]
    fn zero_pulses_identity_gate() {
        let p = GateParams::<f64>::laboratory();
        let pulses = GatePulses::probe_only(PulseSpec::off(0.1));
        let r = evaluate_gate(&p, &pulses, None).unwrap();
        assert_relative_eq!(r.fidelity_ideal, 0.25, epsilon = 1e-12);
        assert_eq!(r.t_e, 0.0);
        assert_eq!(r.t_a, 0.0);
        // Ω₂ alone cannot move population out of |1⟩
        assert_eq!(r.t_r, 0.0);
    }

    #[test]
    fn reduced_space_matches_full_space() {
        let (p, pulses) = short_gate();
        let opts = SimOptions {
            steps: Some(4000),
            full_space: false,
            record_stride: 200,
        };
        let (ra, ta) = simulate_gate(&p, &pulses, &opts).unwrap();
        let full = SimOptions { full_space: true, ..opts };
        let (rb, tb) = simulate_gate(&p, &pulses, &full).unwrap();
        for q in 1..3 {
            for (sa, sb) in ta.states[q].iter().zip(&tb.states[q]) {
                for (x, y) in sa.iter().zip(sb) {
                    assert!((x - y).norm() <= 1e-10);
                }
            }
        }
        assert!((ra.fidelity_ideal - rb.fidelity_ideal).abs() < 1e-10);
        assert!((ra.t_e - rb.t_e).abs() < 1e-12);
    }

    #[test]
    fn mirror_inputs_share_phase() {
        let (p, pulses) = short_gate();
        let (r, tr) = simulate_gate(&p, &pulses, &SimOptions::with_steps(4000)).unwrap();
        assert_eq!(r.phi01, r.phi10);
        let s = p.scheme();
        let i01 = s.pair_index(Level::Q0, Level::Q1).unwrap();
        let i10 = s.pair_index(Level::Q1, Level::Q0).unwrap();
        for (a, b) in tr.states[1].iter().zip(&tr.states[2]) {
            assert_eq!(a[i01], b[i10]);
        }
    }

    #[test]
    fn invariants_hold() {
        let (p, pulses) = short_gate();
        let r = evaluate_gate(&p, &pulses, Some(4000)).unwrap();
        assert!(r.fidelity_ideal >= 0.0 && r.fidelity_ideal <= 1.0);
        assert!(r.fidelity_realistic <= r.fidelity_ideal);
        assert!(r.cost_j >= 1.0 - r.fidelity_ideal);
        assert!(r.max_norm_drift < 1e-9);
        let json = serde_json::to_string(&r).unwrap();
        let back: GateResult<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn lindblad_without_decay_matches_ideal() {
        let (p, pulses) = short_gate();
        let p = p.without_decay();
        let r = evaluate_gate(&p, &pulses, Some(4000)).unwrap();
        let l = lindblad_bell_fidelity(&p, &pulses, Some(4000)).unwrap();
        assert!((l.fidelity - r.fidelity_ideal).abs() < 1e-8);
        assert!(l.max_trace_drift < 1e-8);
        assert!(l.lost_population.abs() < 1e-12);
    }

    #[test]
    fn lindblad_tracks_perturbative_estimate() {
        let (p, pulses) = short_gate();
        let r = evaluate_gate(&p, &pulses, Some(4000)).unwrap();
        let l = lindblad_bell_fidelity(&p, &pulses, Some(4000)).unwrap();
        assert!(l.fidelity <= r.fidelity_ideal);
        assert!((l.fidelity - r.fidelity_realistic).abs() < 5e-4);
        assert!(l.max_trace_drift < 1e-8);
        let with_leak = lindblad_bell_fidelity(&p.with_leakage(true), &pulses, Some(4000)).unwrap();
        assert!((with_leak.fidelity - l.fidelity).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn fidelity_invariant_under_phase_families(
            mags in proptest::array::uniform4(0.0f64..1.0),
            args in proptest::array::uniform4(-3.0f64..3.0),
            g in -3.0f64..3.0,
            phi in -3.0f64..3.0,
        ) {
            let ov: [Cplx<f64>; 4] = std::array::from_fn(|k| Cplx::from_polar(mags[k], args[k]));
            let base = bell_fidelity(&ov).unwrap().fidelity;
            let global = ov.map(|z| z * Cplx::from_polar(1.0, g));
            prop_assert!((bell_fidelity(&global).unwrap().fidelity - base).abs() < 1e-12);
            let fam = [ov[0], ov[1] * Cplx::from_polar(1.0, phi), ov[2] * Cplx::from_polar(1.0, phi), ov[3] * Cplx::from_polar(1.0, 2.0 * phi)];
            prop_assert!((bell_fidelity(&fam).unwrap().fidelity - base).abs() < 1e-12);
            prop_assert!(base >= 0.0 && base <= 1.0 + 1e-12);
        }
    }
}
