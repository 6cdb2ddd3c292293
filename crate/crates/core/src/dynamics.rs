//! Time evolution: Schrödinger states, sampled propagators, Lindblad densities.
//!
//! Every engine is a fixed-step classical RK4 on `i ∂ψ/∂t = H(t) ψ`.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, trapezoid, OperatorMatrix, StateVector};
use crate::scalar::{cplx, Cplx, Real};

/// Minimum number of RK4 steps accepted by the engines.
pub const MIN_STEPS: usize = 1000;

/// Default step density (steps per μs of evolution).
pub const STEPS_PER_US: f64 = 20000.0;

/// Largest `h·‖H‖` allowed by [`default_steps`].
pub const MAX_PHASE_PER_STEP: f64 = 0.35;

/// Norm or trace drift that aborts an integration.
pub const DRIFT_LIMIT: f64 = 1e-6;

/// Abort threshold for `steps` steps: [`DRIFT_LIMIT`], widened to
/// `10 ε √steps` when the scalar's roundoff alone would exceed it.
pub fn drift_limit<T: Real>(steps: usize) -> T {
    let roundoff = T::lit(10.0) * T::epsilon() * T::from_usize_lossy(steps.max(1)).sqrt();
    T::lit(DRIFT_LIMIT).max(roundoff)
}

/// A (possibly time-dependent) Hamiltonian acting on state vectors.
pub trait Generator<T: Real>: Sync {
    fn dim(&self) -> usize;

    /// `out = H(t) ψ`.
    fn apply(&self, t: T, psi: &[Cplx<T>], out: &mut [Cplx<T>]);

    /// `out_k = H(t) ψ_k` for consecutive columns of length `dim`.
    fn apply_block(&self, t: T, block: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let d = self.dim();
        for (col, o) in block.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.apply(t, col, o);
        }
    }

    /// Upper bound on `‖H(t)‖` over the evolution window, if known.
    fn norm_bound(&self) -> Option<T> {
        None
    }
}

/// Wraps a closure `t -> H(t)` returning dense matrices.
pub struct DenseGenerator<F> {
    dim: usize,
    f: F,
    bound: Option<f64>,
}

impl<F> DenseGenerator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, bound: None }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }
}

impl<T, F> Generator<T> for DenseGenerator<F>
where
    T: Real,
    F: Fn(T) -> OperatorMatrix<T> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: T, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        (self.f)(t).apply_into(psi, out);
    }

    fn apply_block(&self, t: T, block: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let h = (self.f)(t);
        for (col, o) in block.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.dim)) {
            h.apply_into(col, o);
        }
    }

    fn norm_bound(&self) -> Option<T> {
        self.bound.map(T::lit)
    }
}

/// Time-independent Hamiltonian.
#[derive(Clone, Debug)]
pub struct ConstantGenerator<T: Real> {
    h: OperatorMatrix<T>,
    bound: T,
}

impl<T: Real> ConstantGenerator<T> {
    pub fn new(h: OperatorMatrix<T>) -> Self {
        let bound = h.inf_norm();
        Self { h, bound }
    }
}

impl<T: Real> Generator<T> for ConstantGenerator<T> {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn apply(&self, _t: T, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        self.h.apply_into(psi, out);
    }

    fn norm_bound(&self) -> Option<T> {
        Some(self.bound)
    }
}

/// Step count for a window of length `t_end`: at least [`STEPS_PER_US`]
/// per μs, at least [`MIN_STEPS`], and fine enough that `h·bound ≤ 0.35`.
pub fn default_steps<T: Real>(t_end: T, bound: Option<T>) -> usize {
    let t = t_end.to_f64_lossy().max(0.0);
    let by_density = (STEPS_PER_US * t).ceil();
    let by_bound = bound.map_or(0.0, |b| (b.to_f64_lossy() * t / MAX_PHASE_PER_STEP).ceil());
    (by_density.max(by_bound) as usize).max(MIN_STEPS)
}

fn check_steps<T: Real>(t_end: T, steps: usize) -> Result<T> {
    if steps < MIN_STEPS {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_STEPS} steps are required, got {steps}"
        )));
    }
    if !(t_end.is_finite() && t_end >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "evolution window must be finite and non-negative, got {t_end}"
        )));
    }
    Ok(t_end / T::from_usize_lossy(steps))
}

/// Scratch space for block RK4.
struct Rk4Work<T: Real> {
    k: Vec<Cplx<T>>,
    acc: Vec<Cplx<T>>,
    probe: Vec<Cplx<T>>,
}

impl<T: Real> Rk4Work<T> {
    fn new(len: usize) -> Self {
        Self {
            k: vec![Cplx::zero(); len],
            acc: vec![Cplx::zero(); len],
            probe: vec![Cplx::zero(); len],
        }
    }
}

/// One RK4 step of `ẏ = -i H(t) y` applied to every column of `y`.
fn rk4_step<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    t: T,
    h: T,
    y: &mut [Cplx<T>],
    w: &mut Rk4Work<T>,
) {
    let half = h * T::lit(0.5);
    let mi = cplx(T::zero(), -T::one());
    // stage 1
    gen.apply_block(t, y, &mut w.k);
    for i in 0..y.len() {
        w.acc[i] = w.k[i];
        w.probe[i] = y[i] + mi * w.k[i] * half;
    }
    // stage 2
    gen.apply_block(t + half, &w.probe, &mut w.k);
    for i in 0..y.len() {
        w.acc[i] += w.k[i] * T::lit(2.0);
        w.probe[i] = y[i] + mi * w.k[i] * half;
    }
    // stage 3
    gen.apply_block(t + half, &w.probe, &mut w.k);
    for i in 0..y.len() {
        w.acc[i] += w.k[i] * T::lit(2.0);
        w.probe[i] = y[i] + mi * w.k[i] * h;
    }
    // stage 4
    gen.apply_block(t + h, &w.probe, &mut w.k);
    let sixth = h / T::lit(6.0);
    for i in 0..y.len() {
        y[i] += mi * (w.acc[i] + w.k[i]) * sixth;
    }
}

/// Integrates a block of columns from `0` to `t_end`, calling
/// `observer(step, t, block)` at step 0 and after every step.
pub fn integrate<T, G, F>(
    gen: &G,
    initial: &[Cplx<T>],
    t_end: T,
    steps: usize,
    mut observer: F,
) -> Result<StateVector<T>>
where
    T: Real,
    G: Generator<T> + ?Sized,
    F: FnMut(usize, T, &[Cplx<T>]),
{
    let h = check_steps(t_end, steps)?;
    if initial.len() % gen.dim() != 0 {
        return Err(Error::InvalidParameter(format!(
            "state length {} is not a multiple of the generator dimension {}",
            initial.len(),
            gen.dim()
        )));
    }
    let mut y = initial.to_vec();
    let mut work = Rk4Work::new(y.len());
    observer(0, T::zero(), &y);
    for s in 0..steps {
        let t = h * T::from_usize_lossy(s);
        rk4_step(gen, t, h, &mut y, &mut work);
        observer(s + 1, h * T::from_usize_lossy(s + 1), &y);
    }
    if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::IntegrationFailure(
            "state became non-finite; increase the step count".into(),
        ));
    }
    Ok(y)
}

/// Population observable diagonal in the simulation basis, `Σ_k w_k |ψ_k|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalObservable<T: Real> {
    pub label: String,
    pub weights: Vec<T>,
}

impl<T: Real> DiagonalObservable<T> {
    pub fn from_matrix(label: &str, m: &OperatorMatrix<T>) -> Self {
        Self {
            label: label.to_string(),
            weights: (0..m.dim()).map(|i| m[(i, i)].re).collect(),
        }
    }

    #[inline]
    pub fn expectation(&self, psi: &[Cplx<T>]) -> T {
        self.weights
            .iter()
            .zip(psi)
            .map(|(&w, z)| w * z.norm_sqr())
            .sum()
    }
}

/// Options for [`evolve_state_with`].
#[derive(Clone, Debug)]
pub struct EvolveOptions<T: Real> {
    pub steps: usize,
    /// Store every `record_stride`-th state (populations are kept on every step).
    pub record_stride: usize,
    pub observables: Vec<DiagonalObservable<T>>,
    pub label: String,
}

impl<T: Real> EvolveOptions<T> {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            record_stride: 1,
            observables: Vec::new(),
            label: "psi".into(),
        }
    }
}

/// Recorded evolution of one or more input states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T: Real> {
    /// Full integration grid (μs); populations live on this grid.
    pub times: Vec<T>,
    pub input_labels: Vec<String>,
    /// Grid indices at which states were stored.
    pub state_steps: Vec<usize>,
    /// `states[input][k]` is the state at `times[state_steps[k]]`.
    pub states: Vec<Vec<StateVector<T>>>,
    /// Observable label -> values on `times`.
    pub populations: BTreeMap<String, Vec<T>>,
    /// Largest `|‖ψ‖² - 1|` seen over all inputs and steps.
    pub max_norm_drift: T,
}

impl<T: Real> Trajectory<T> {
    pub fn dt(&self) -> T {
        if self.times.len() < 2 {
            T::zero()
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn final_state(&self, input: usize) -> Option<&StateVector<T>> {
        self.states.get(input).and_then(|s| s.last())
    }

    pub fn state_times(&self) -> Vec<T> {
        self.state_steps.iter().map(|&k| self.times[k]).collect()
    }

    pub fn population(&self, label: &str) -> Result<&[T]> {
        self.populations
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownLevel(label.to_string()))
    }
}

/// Fixed-step RK4 evolution storing every state.
pub fn evolve_state<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    psi0: &[Cplx<T>],
    t_end: T,
    steps: usize,
) -> Result<Trajectory<T>> {
    evolve_state_with(gen, psi0, t_end, &EvolveOptions::new(steps))
}

/// Fixed-step RK4 evolution with observables and state subsampling.
pub fn evolve_state_with<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    psi0: &[Cplx<T>],
    t_end: T,
    opts: &EvolveOptions<T>,
) -> Result<Trajectory<T>> {
    if psi0.len() != gen.dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state has length {}, generator dimension is {}",
            psi0.len(),
            gen.dim()
        )));
    }
    let n0 = norm_sqr(psi0);
    if (n0 - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::NonPhysical(format!(
            "initial state must be normalized, ‖ψ‖² = {n0}"
        )));
    }
    let stride = opts.record_stride.max(1);
    let steps = opts.steps;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::new();
    let mut state_steps = Vec::new();
    let mut pops: Vec<Vec<T>> = vec![Vec::with_capacity(steps + 1); opts.observables.len()];
    let mut drift = T::zero();
    integrate(gen, psi0, t_end, steps, |s, t, y| {
        times.push(t);
        if s % stride == 0 || s == steps {
            states.push(y.to_vec());
            state_steps.push(s);
        }
        for (p, obs) in pops.iter_mut().zip(&opts.observables) {
            p.push(obs.expectation(y));
        }
        drift = drift.max((norm_sqr(y) - T::one()).abs());
    })?;
    let limit = drift_limit::<T>(steps);
    if drift > limit {
        return Err(Error::IntegrationFailure(format!(
            "norm drift {drift} exceeds {limit}; increase the step count"
        )));
    }
    Ok(Trajectory {
        times,
        input_labels: vec![opts.label.clone()],
        state_steps,
        states: vec![states],
        populations: opts
            .observables
            .iter()
            .map(|o| o.label.clone())
            .zip(pops)
            .collect(),
        max_norm_drift: drift,
    })
}

/// `U(t_k)` on a uniform sample grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSample<T: Real> {
    pub times: Vec<T>,
    pub unitaries: Vec<OperatorMatrix<T>>,
}

impl<T: Real> PropagatorSample<T> {
    /// Largest `‖U†U - I‖` element over all samples.
    pub fn max_unitarity_defect(&self) -> T {
        self.unitaries
            .iter()
            .map(OperatorMatrix::unitarity_defect)
            .fold(T::zero(), T::max)
    }
}

/// Columns `U(t_k)|c⟩` for a set of initial columns, on `samples` uniform
/// points including both ends. `steps` is rounded up to a multiple of
/// `samples - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSample<T: Real> {
    pub times: Vec<T>,
    /// `columns[k][c]` is column `c` at `times[k]`.
    pub columns: Vec<Vec<StateVector<T>>>,
    pub steps: usize,
}

pub fn evolve_columns<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    initial: &[StateVector<T>],
    t_end: T,
    steps: usize,
    samples: usize,
) -> Result<ColumnSample<T>> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let d = gen.dim();
    if initial.iter().any(|c| c.len() != d) {
        return Err(Error::InvalidParameter(
            "column length must equal the generator dimension".into(),
        ));
    }
    let every = steps.div_ceil(samples - 1).max(1);
    let steps = every * (samples - 1);
    let flat: Vec<Cplx<T>> = initial.iter().flatten().copied().collect();
    let norms: Vec<T> = initial.iter().map(|c| norm_sqr(c)).collect();
    let mut times = Vec::with_capacity(samples);
    let mut columns = Vec::with_capacity(samples);
    let mut drift = T::zero();
    integrate(gen, &flat, t_end, steps, |s, t, y| {
        if s % every == 0 {
            times.push(t);
            let cols: Vec<StateVector<T>> = y.chunks_exact(d).map(<[_]>::to_vec).collect();
            for (c, &n0) in cols.iter().zip(&norms) {
                drift = drift.max((norm_sqr(c) - n0).abs());
            }
            columns.push(cols);
        }
    })?;
    let limit = drift_limit::<T>(steps);
    if drift > limit {
        return Err(Error::IntegrationFailure(format!(
            "column norm drift {drift} exceeds {limit}; increase the step count"
        )));
    }
    Ok(ColumnSample {
        times,
        columns,
        steps,
    })
}

/// Time-ordered propagator `U(t)` with `U(0) = I`, sampled at `samples` points.
pub fn evolve_propagator<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    t_end: T,
    steps: usize,
    samples: usize,
) -> Result<PropagatorSample<T>> {
    let d = gen.dim();
    let initial: Vec<StateVector<T>> = (0..d).map(|k| crate::linalg::basis(d, k)).collect();
    let cs = evolve_columns(gen, &initial, t_end, steps, samples)?;
    let unitaries = cs
        .columns
        .iter()
        .map(|cols| {
            let mut u = OperatorMatrix::zeros(d);
            for (j, c) in cols.iter().enumerate() {
                u.set_column(j, c);
            }
            u
        })
        .collect::<Vec<_>>();
    let out = PropagatorSample {
        times: cs.times,
        unitaries,
    };
    let defect = out
        .unitaries
        .last()
        .map_or(T::zero(), OperatorMatrix::unitarity_defect);
    let limit = drift_limit::<T>(steps);
    if defect > limit {
        return Err(Error::IntegrationFailure(format!(
            "unitarity defect {defect} exceeds {limit}; increase the step count"
        )));
    }
    Ok(out)
}

/// A collapse operator with its rate (μs⁻¹), stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump<T: Real> {
    pub rate: T,
    entries: Vec<(usize, usize, Cplx<T>)>,
    /// Sparse `L†L`.
    ldl: Vec<(usize, usize, Cplx<T>)>,
}

impl<T: Real> Jump<T> {
    pub fn new(rate: T, op: &OperatorMatrix<T>) -> Result<Self> {
        if !(rate.is_finite() && rate >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "jump rate must be finite and non-negative, got {rate}"
            )));
        }
        Ok(Self {
            rate,
            entries: op.nonzeros(),
            ldl: op.adjoint().matmul(op).nonzeros(),
        })
    }
}

/// Recorded density-matrix evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTrajectory<T: Real> {
    pub times: Vec<T>,
    pub densities: Vec<OperatorMatrix<T>>,
    pub max_trace_drift: T,
}

impl<T: Real> DensityTrajectory<T> {
    pub fn final_density(&self) -> &OperatorMatrix<T> {
        self.densities.last().expect("at least the initial density is recorded")
    }
}

/// `dρ/dt = -i[H, ρ] + Σ γ (L ρ L† - ½{L†L, ρ})` into `out`.
fn lindblad_rhs<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    jumps: &[Jump<T>],
    t: T,
    rho: &[Cplx<T>],
    out: &mut [Cplx<T>],
    scratch: &mut [Cplx<T>],
) {
    let d = gen.dim();
    // ρ is stored row-major; Hermitian, so column j of ρ equals conj of row j.
    // Compute Hρ column by column via the transpose trick on rows of ρ*.
    let mut col = vec![Cplx::zero(); d];
    let mut hcol = vec![Cplx::zero(); d];
    for j in 0..d {
        for i in 0..d {
            col[i] = rho[i * d + j];
        }
        gen.apply(t, &col, &mut hcol);
        for i in 0..d {
            scratch[i * d + j] = hcol[i];
        }
    }
    let mi = cplx(T::zero(), -T::one());
    for i in 0..d {
        for j in 0..d {
            // (ρH)_{ij} = conj((Hρ)_{ji}) for Hermitian ρ
            out[i * d + j] = mi * (scratch[i * d + j] - scratch[j * d + i].conj());
        }
    }
    let half = T::lit(0.5);
    for jump in jumps {
        if jump.rate.is_zero() {
            continue;
        }
        let g = jump.rate;
        for &(a, b, la) in &jump.entries {
            for &(c, e, lc) in &jump.entries {
                out[a * d + c] += la * rho[b * d + e] * lc.conj() * g;
            }
        }
        for &(a, b, m) in &jump.ldl {
            for k in 0..d {
                out[a * d + k] -= m * rho[b * d + k] * g * half;
                out[k * d + b] -= rho[k * d + a] * m * g * half;
            }
        }
    }
}

/// RK4 integration of the Lindblad equation. `rho0` must be Hermitian with
/// unit trace.
pub fn evolve_lindblad<T: Real, G: Generator<T> + ?Sized>(
    gen: &G,
    jumps: &[Jump<T>],
    rho0: &OperatorMatrix<T>,
    t_end: T,
    steps: usize,
    record_stride: usize,
) -> Result<DensityTrajectory<T>> {
    let h = check_steps(t_end, steps)?;
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::InvalidParameter(format!(
            "density dimension {} does not match generator dimension {d}",
            rho0.dim()
        )));
    }
    let tol = T::lit(1e-9);
    if (rho0.trace().re - T::one()).abs() > tol || rho0.hermiticity_defect() > tol {
        return Err(Error::NonPhysical(
            "initial density must be Hermitian with unit trace".into(),
        ));
    }
    let n = d * d;
    let mut rho: Vec<Cplx<T>> = rho0.entries().to_vec();
    let (mut k, mut acc, mut probe, mut scratch) = (
        vec![Cplx::zero(); n],
        vec![Cplx::zero(); n],
        vec![Cplx::zero(); n],
        vec![Cplx::zero(); n],
    );
    let stride = record_stride.max(1);
    let mut times = vec![T::zero()];
    let mut densities = vec![rho0.clone()];
    let mut drift = T::zero();
    let half = h * T::lit(0.5);
    let two = T::lit(2.0);
    for s in 0..steps {
        let t = h * T::from_usize_lossy(s);
        lindblad_rhs(gen, jumps, t, &rho, &mut k, &mut scratch);
        for i in 0..n {
            acc[i] = k[i];
            probe[i] = rho[i] + k[i] * half;
        }
        lindblad_rhs(gen, jumps, t + half, &probe, &mut k, &mut scratch);
        for i in 0..n {
            acc[i] += k[i] * two;
            probe[i] = rho[i] + k[i] * half;
        }
        lindblad_rhs(gen, jumps, t + half, &probe, &mut k, &mut scratch);
        for i in 0..n {
            acc[i] += k[i] * two;
            probe[i] = rho[i] + k[i] * h;
        }
        lindblad_rhs(gen, jumps, t + h, &probe, &mut k, &mut scratch);
        let sixth = h / T::lit(6.0);
        for i in 0..n {
            rho[i] += (acc[i] + k[i]) * sixth;
        }
        // keep ρ exactly Hermitian
        for i in 0..d {
            rho[i * d + i].im = T::zero();
            for j in (i + 1)..d {
                let avg = (rho[i * d + j] + rho[j * d + i].conj()) * T::lit(0.5);
                rho[i * d + j] = avg;
                rho[j * d + i] = avg.conj();
            }
        }
        let tr: T = (0..d).map(|i| rho[i * d + i].re).sum();
        drift = drift.max((tr - T::one()).abs());
        if s + 1 == steps || (s + 1) % stride == 0 {
            times.push(h * T::from_usize_lossy(s + 1));
            densities.push(OperatorMatrix::from_row_major(d, rho.clone()));
        }
    }
    let limit = drift_limit::<T>(steps);
    if !drift.is_finite() || drift > limit {
        return Err(Error::IntegrationFailure(format!(
            "trace drift {drift} exceeds {limit}; increase the step count"
        )));
    }
    Ok(DensityTrajectory {
        times,
        densities,
        max_trace_drift: drift,
    })
}

/// `∫₀ᵀ n̄_ℓ(t) dt` by the trapezoid rule on the trajectory grid (μs).
pub fn time_in_state<T: Real>(traj: &Trajectory<T>, level: &str) -> Result<T> {
    let pops = traj.population(level)?;
    Ok(trapezoid(pops, traj.dt()))
}

/// Pure-state projector `|ψ⟩⟨ψ|`.
pub fn pure_density<T: Real>(psi: &[Cplx<T>]) -> OperatorMatrix<T> {
    OperatorMatrix::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
}
