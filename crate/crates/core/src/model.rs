//! Level scheme, gate parameters and Hamiltonian construction.
//!
//! Internal units: angular frequencies and rates in rad/μs, time in μs.
//! Single-atom levels are ordered `[0, 1, e, r, a]`, with the leakage level
//! `k` appended when enabled. Two-atom states use atom-1-major ordering,
//! `|i j⟩ -> i * d + j`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Generator;
use crate::error::{Error, Result};
use crate::linalg::OperatorMatrix;
use crate::pulses::GatePulses;
use crate::scalar::{creal, Cplx, Real};

/// Unit conversions. Config values quoted "in MHz" mean `X/2π`.
pub mod units {
    use crate::scalar::Real;

    /// `X/2π` in MHz -> rad/μs.
    #[inline]
    pub fn mhz<T: Real>(x: T) -> T {
        x * T::TAU()
    }

    /// rad/μs -> `X/2π` in MHz.
    #[inline]
    pub fn to_mhz<T: Real>(omega: T) -> T {
        omega / T::TAU()
    }

    /// `X/2π` in GHz -> rad/μs.
    #[inline]
    pub fn ghz<T: Real>(x: T) -> T {
        mhz(x * T::lit(1e3))
    }

    /// Plain rate in kHz (no 2π) -> μs⁻¹.
    #[inline]
    pub fn khz_rate<T: Real>(x: T) -> T {
        x * T::lit(1e-3)
    }

    /// Plain rate in μs⁻¹ -> kHz.
    #[inline]
    pub fn to_khz_rate<T: Real>(rate: T) -> T {
        rate * T::lit(1e3)
    }

    /// Nanoseconds -> μs.
    #[inline]
    pub fn ns<T: Real>(x: T) -> T {
        x * T::lit(1e-3)
    }
}

/// Atomic level labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    /// Idle qubit state `|0⟩`.
    Q0,
    /// Driven qubit state `|1⟩`.
    Q1,
    /// Intermediate state `|e⟩`.
    E,
    /// Rydberg state `|r⟩`.
    R,
    /// Ancillary hyperfine state `|a⟩`.
    A,
    /// Leakage hyperfine state `|k⟩`.
    K,
    /// Sink for decayed population (master-equation runs only).
    Dump,
}

impl Level {
    pub fn label(self) -> &'static str {
        match self {
            Level::Q0 => "0",
            Level::Q1 => "1",
            Level::E => "e",
            Level::R => "r",
            Level::A => "a",
            Level::K => "k",
            Level::Dump => "d",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "0" | "q0" => Level::Q0,
            "1" | "q1" => Level::Q1,
            "e" => Level::E,
            "r" => Level::R,
            "a" => Level::A,
            "k" => Level::K,
            "d" | "dump" => Level::Dump,
            other => return Err(Error::UnknownLevel(other.to_string())),
        })
    }
}

/// Ordered single-atom basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelScheme {
    levels: Vec<Level>,
}

impl LevelScheme {
    /// `[0, 1, e, r, a]`, plus `k` when `include_leakage`.
    pub fn standard(include_leakage: bool) -> Self {
        let mut levels = vec![Level::Q0, Level::Q1, Level::E, Level::R, Level::A];
        if include_leakage {
            levels.push(Level::K);
        }
        Self { levels }
    }

    /// Standard scheme followed by a dump level.
    pub fn with_dump(include_leakage: bool) -> Self {
        let mut s = Self::standard(include_leakage);
        s.levels.push(Level::Dump);
        s
    }

    /// Arbitrary ordered subset, e.g. `[1, r]` for the effective two-level model.
    pub fn custom(levels: Vec<Level>) -> Result<Self> {
        for (i, l) in levels.iter().enumerate() {
            if levels[..i].contains(l) {
                return Err(Error::InvalidParameter(format!("duplicate level {l}")));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn index(&self, level: Level) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }

    pub fn require(&self, level: Level) -> Result<usize> {
        self.index(level)
            .ok_or_else(|| Error::UnknownLevel(level.label().to_string()))
    }

    pub fn index_of_label(&self, label: &str) -> Result<usize> {
        self.require(label.parse()?)
    }

    /// Index of `|i j⟩` in the two-atom product space.
    pub fn pair_index(&self, first: Level, second: Level) -> Result<usize> {
        Ok(self.require(first)? * self.dim() + self.require(second)?)
    }
}

/// Static laser, atom and decay parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams<T: Real> {
    /// Intermediate detuning Δ (rad/μs).
    pub delta_big: T,
    /// Fixed coupling laser Rabi frequency Ω₂ (rad/μs).
    pub omega2: T,
    /// Ancilla detuning ratio, `Δ_c = -α Δ`.
    pub alpha: T,
    /// Two-photon detuning δ_opt (rad/μs).
    pub delta_opt: T,
    /// Blockade shift V on `|rr⟩` (rad/μs).
    pub blockade_v: T,
    /// Intermediate-state decay rate (μs⁻¹).
    pub gamma_e: T,
    /// Rydberg decay rate (μs⁻¹).
    pub gamma_r: T,
    /// Leakage branching ratio b.
    pub branching_b: T,
    pub include_leakage: bool,
    /// Peak-amplitude caps for the shaped probe and ancilla (rad/μs).
    pub amp_cap_1: T,
    pub amp_cap_c: T,
}

impl<T: Real> GateParams<T> {
    /// Laboratory defaults: Δ/2π = 1 GHz, Ω₂/2π = 50 MHz, V/2π = 300 MHz,
    /// γ_e/2π = 1 MHz, γ_r = 3 kHz, b = 0.0667, amplitude caps 200 MHz,
    /// no ancilla (α = 0) and δ_opt = 0.
    pub fn laboratory() -> Self {
        Self {
            delta_big: units::ghz(T::one()),
            omega2: units::mhz(T::lit(50.0)),
            alpha: T::zero(),
            delta_opt: T::zero(),
            blockade_v: units::mhz(T::lit(300.0)),
            gamma_e: units::mhz(T::one()),
            gamma_r: units::khz_rate(T::lit(3.0)),
            branching_b: T::lit(0.0667),
            include_leakage: false,
            amp_cap_1: units::mhz(T::lit(200.0)),
            amp_cap_c: units::mhz(T::lit(200.0)),
        }
    }

    /// Ancilla detuning `Δ_c = -α Δ`.
    pub fn delta_c(&self) -> T {
        -self.alpha * self.delta_big
    }

    /// Ancilla level energy offset `Δ + Δ_c`.
    pub fn ancilla_detuning(&self) -> T {
        self.delta_big + self.delta_c()
    }

    /// Copy with all decay rates switched off.
    pub fn without_decay(&self) -> Self {
        Self {
            gamma_e: T::zero(),
            gamma_r: T::zero(),
            ..self.clone()
        }
    }

    pub fn with_leakage(&self, on: bool) -> Self {
        Self {
            include_leakage: on,
            ..self.clone()
        }
    }

    /// `Δ_c -> (1 + η) Δ_c`.
    pub fn with_detuning_deviation(&self, eta: T) -> Self {
        Self {
            alpha: self.alpha * (T::one() + eta),
            ..self.clone()
        }
    }

    pub fn scheme(&self) -> LevelScheme {
        LevelScheme::standard(self.include_leakage)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("delta_big", self.delta_big),
            ("omega2", self.omega2),
            ("alpha", self.alpha),
            ("delta_opt", self.delta_opt),
            ("blockade_v", self.blockade_v),
            ("gamma_e", self.gamma_e),
            ("gamma_r", self.gamma_r),
            ("branching_b", self.branching_b),
            ("amp_cap_1", self.amp_cap_1),
            ("amp_cap_c", self.amp_cap_c),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::NonFinite(name.to_string()));
            }
        }
        if self.delta_big <= T::zero() {
            return Err(Error::InvalidParameter("Δ must be positive".into()));
        }
        if self.alpha < T::zero() || self.alpha >= T::one() {
            return Err(Error::InvalidParameter(format!(
                "α must lie in [0, 1) so that Δ + Δ_c > 0, got {}",
                self.alpha
            )));
        }
        if self.gamma_e < T::zero() || self.gamma_r < T::zero() || self.branching_b < T::zero() {
            return Err(Error::InvalidParameter(
                "decay rates and branching ratio must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Sparse single-atom Hamiltonian: a real diagonal plus three real couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomTerms<T: Real> {
    pub diag: Vec<T>,
    /// `(i, j, g)` meaning `g (|i⟩⟨j| + |j⟩⟨i|)`.
    pub couplings: [(usize, usize, T); 3],
}

impl<T: Real> AtomTerms<T> {
    pub fn new(scheme: &LevelScheme, params: &GateParams<T>, omega1: T, omegac: T) -> Result<Self> {
        let half = T::lit(0.5);
        let mut diag = vec![T::zero(); scheme.dim()];
        let q1 = scheme.require(Level::Q1)?;
        let e = scheme.require(Level::E)?;
        let r = scheme.require(Level::R)?;
        let a = scheme.require(Level::A)?;
        diag[e] = -params.delta_big;
        diag[a] = -params.ancilla_detuning();
        diag[r] = -params.delta_opt;
        Ok(Self {
            diag,
            couplings: [
                (e, q1, half * omega1),
                (r, e, half * params.omega2),
                (e, a, half * omegac),
            ],
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_matrix(&self) -> OperatorMatrix<T> {
        let mut h = OperatorMatrix::zeros(self.dim());
        for (i, &d) in self.diag.iter().enumerate() {
            h[(i, i)] = creal(d);
        }
        for &(i, j, g) in &self.couplings {
            h[(i, j)] += creal(g);
            h[(j, i)] += creal(g);
        }
        h
    }

    /// `out = H₀ ψ` on one atom.
    #[inline]
    pub fn apply(&self, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        for ((o, &p), &d) in out.iter_mut().zip(psi).zip(&self.diag) {
            *o = p * d;
        }
        for &(i, j, g) in &self.couplings {
            out[i] += psi[j] * g;
            out[j] += psi[i] * g;
        }
    }

    /// `out = (H₀⊗I + I⊗H₀ + V|rr⟩⟨rr|) ψ` on the product space.
    #[inline]
    pub fn apply_pair(&self, v: T, rr: usize, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = psi[i * d + j] * (self.diag[i] + self.diag[j]);
            }
        }
        for &(a, b, g) in &self.couplings {
            if g.is_zero() {
                continue;
            }
            // first atom
            for j in 0..d {
                out[a * d + j] += psi[b * d + j] * g;
                out[b * d + j] += psi[a * d + j] * g;
            }
            // second atom
            for i in 0..d {
                out[i * d + a] += psi[i * d + b] * g;
                out[i * d + b] += psi[i * d + a] * g;
            }
        }
        out[rr] += psi[rr] * v;
    }

    /// Gershgorin bound on the single-atom spectral radius.
    pub fn norm_bound(&self) -> T {
        let mut rows: Vec<T> = self.diag.iter().map(|d| d.abs()).collect();
        for &(i, j, g) in &self.couplings {
            rows[i] += g.abs();
            rows[j] += g.abs();
        }
        rows.into_iter().fold(T::zero(), T::max)
    }
}

fn check_finite<T: Real>(omega1: T, omegac: T) -> Result<()> {
    if !omega1.is_finite() || !omegac.is_finite() {
        return Err(Error::NonFinite(format!(
            "drive amplitudes Ω₁={omega1}, Ω_c={omegac}"
        )));
    }
    Ok(())
}

/// Single-atom Hamiltonian `H₀` in the scheme selected by `params.include_leakage`.
pub fn single_atom_hamiltonian<T: Real>(
    params: &GateParams<T>,
    omega1: T,
    omegac: T,
) -> Result<OperatorMatrix<T>> {
    single_atom_hamiltonian_in(&params.scheme(), params, omega1, omegac)
}

/// Single-atom Hamiltonian in an explicit scheme (e.g. one with a dump level).
pub fn single_atom_hamiltonian_in<T: Real>(
    scheme: &LevelScheme,
    params: &GateParams<T>,
    omega1: T,
    omegac: T,
) -> Result<OperatorMatrix<T>> {
    params.validate()?;
    check_finite(omega1, omegac)?;
    Ok(AtomTerms::new(scheme, params, omega1, omegac)?.to_matrix())
}

/// `H = H₀⊗I + I⊗H₀ + V|rr⟩⟨rr|`.
pub fn two_atom_hamiltonian<T: Real>(
    params: &GateParams<T>,
    omega1: T,
    omegac: T,
) -> Result<OperatorMatrix<T>> {
    two_atom_hamiltonian_in(&params.scheme(), params, omega1, omegac)
}

pub fn two_atom_hamiltonian_in<T: Real>(
    scheme: &LevelScheme,
    params: &GateParams<T>,
    omega1: T,
    omegac: T,
) -> Result<OperatorMatrix<T>> {
    let h0 = single_atom_hamiltonian_in(scheme, params, omega1, omegac)?;
    let id = OperatorMatrix::identity(scheme.dim());
    let mut h = &h0.kron(&id) + &id.kron(&h0);
    let rr = scheme.pair_index(Level::R, Level::R)?;
    h[(rr, rr)] += creal(params.blockade_v);
    Ok(h)
}

/// Single-atom projector `Π_ℓ`.
pub fn level_projector<T: Real>(scheme: &LevelScheme, level: Level) -> Result<OperatorMatrix<T>> {
    let i = scheme.require(level)?;
    Ok(OperatorMatrix::outer_basis(scheme.dim(), i, i))
}

/// Population-counting operator for a set of level labels.
///
/// With one atom this is `Σ_ℓ Π_ℓ`; with two atoms it is the number operator
/// `Σ_ℓ (Π_ℓ⊗I + I⊗Π_ℓ)`.
pub fn projector<T: Real>(
    scheme: &LevelScheme,
    labels: &[&str],
    n_atoms: usize,
) -> Result<OperatorMatrix<T>> {
    let d = scheme.dim();
    let id = OperatorMatrix::identity(d);
    let mut out = OperatorMatrix::zeros(d.pow(n_atoms as u32));
    for label in labels {
        let p = level_projector::<T>(scheme, label.parse()?)?;
        let term = match n_atoms {
            1 => p,
            2 => &p.kron(&id) + &id.kron(&p),
            n => {
                return Err(Error::InvalidParameter(format!(
                    "projectors are defined for one or two atoms, got {n}"
                )))
            }
        };
        out = &out + &term;
    }
    Ok(out)
}

/// Two-atom number operator `n_ℓ = Π_ℓ⊗I + I⊗Π_ℓ`.
pub fn number_operator<T: Real>(scheme: &LevelScheme, level: Level) -> Result<OperatorMatrix<T>> {
    projector(scheme, &[level.label()], 2)
}

/// Rank-4 projector onto `{|00⟩, |01⟩, |10⟩, |11⟩}`.
pub fn computational_projector<T: Real>(scheme: &LevelScheme) -> Result<OperatorMatrix<T>> {
    let mut p = OperatorMatrix::zeros(scheme.dim() * scheme.dim());
    for &k in &computational_indices(scheme)? {
        p[(k, k)] = creal(T::one());
    }
    Ok(p)
}

/// Product-space indices of `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn computational_indices(scheme: &LevelScheme) -> Result<[usize; 4]> {
    Ok([
        scheme.pair_index(Level::Q0, Level::Q0)?,
        scheme.pair_index(Level::Q0, Level::Q1)?,
        scheme.pair_index(Level::Q1, Level::Q0)?,
        scheme.pair_index(Level::Q1, Level::Q1)?,
    ])
}

/// Atom-exchange permutation on the product space.
pub fn swap_operator<T: Real>(dim: usize) -> OperatorMatrix<T> {
    let mut s = OperatorMatrix::zeros(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            s[(i * dim + j, j * dim + i)] = creal(T::one());
        }
    }
    s
}

/// Which atoms a [`GateHamiltonian`] acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Atoms {
    One,
    Two,
}

/// Time-dependent gate Hamiltonian driven by Bernstein pulses.
///
/// Applies the sparse structure directly instead of materialising the
/// product-space matrix.
#[derive(Clone, Debug)]
pub struct GateHamiltonian<T: Real> {
    params: GateParams<T>,
    pulses: GatePulses<T>,
    scheme: LevelScheme,
    atoms: Atoms,
    rr: usize,
    bound: T,
}

impl<T: Real> GateHamiltonian<T> {
    pub fn new(params: &GateParams<T>, pulses: &GatePulses<T>, atoms: Atoms) -> Result<Self> {
        Self::in_scheme(params.scheme(), params, pulses, atoms)
    }

    pub fn in_scheme(
        scheme: LevelScheme,
        params: &GateParams<T>,
        pulses: &GatePulses<T>,
        atoms: Atoms,
    ) -> Result<Self> {
        params.validate()?;
        pulses.validate()?;
        let (p1, pc) = pulses.peaks();
        let single = AtomTerms::new(&scheme, params, p1, pc)?.norm_bound();
        let bound = match atoms {
            Atoms::One => single,
            Atoms::Two => T::lit(2.0) * single + params.blockade_v.abs(),
        };
        let rr = scheme.pair_index(Level::R, Level::R)?;
        Ok(Self {
            params: params.clone(),
            pulses: pulses.clone(),
            scheme,
            atoms,
            rr,
            bound,
        })
    }

    pub fn scheme(&self) -> &LevelScheme {
        &self.scheme
    }

    pub fn params(&self) -> &GateParams<T> {
        &self.params
    }

    pub fn pulses(&self) -> &GatePulses<T> {
        &self.pulses
    }

    pub fn atoms(&self) -> Atoms {
        self.atoms
    }

    #[inline]
    fn terms(&self, t: T) -> AtomTerms<T> {
        let (o1, oc) = self.pulses.values(t);
        AtomTerms::new(&self.scheme, &self.params, o1, oc)
            .expect("scheme validated at construction")
    }

    /// Dense matrix at time `t`.
    pub fn matrix(&self, t: T) -> OperatorMatrix<T> {
        let (o1, oc) = self.pulses.values(t);
        match self.atoms {
            Atoms::One => single_atom_hamiltonian_in(&self.scheme, &self.params, o1, oc),
            Atoms::Two => two_atom_hamiltonian_in(&self.scheme, &self.params, o1, oc),
        }
        .expect("parameters validated at construction")
    }
}

impl<T: Real> Generator<T> for GateHamiltonian<T> {
    fn dim(&self) -> usize {
        match self.atoms {
            Atoms::One => self.scheme.dim(),
            Atoms::Two => self.scheme.dim() * self.scheme.dim(),
        }
    }

    #[inline]
    fn apply(&self, t: T, psi: &[Cplx<T>], out: &mut [Cplx<T>]) {
        let terms = self.terms(t);
        match self.atoms {
            Atoms::One => terms.apply(psi, out),
            Atoms::Two => terms.apply_pair(self.params.blockade_v, self.rr, psi, out),
        }
    }

    fn norm_bound(&self) -> Option<T> {
        Some(self.bound)
    }
}
