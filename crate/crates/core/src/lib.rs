//! Simulation and pulse optimization for ancilla-accelerated Rydberg CZ gates.
//!
//! Each atom has the levels `|0⟩, |1⟩` (qubit), `|e⟩` (lossy intermediate),
//! `|r⟩` (Rydberg) and `|a⟩` (ancilla hyperfine state). A shaped probe
//! `Ω₁(t)` and an optional shaped ancilla drive `Ω_c(t)` are parameterized by
//! Bernstein envelopes. The crate provides:
//!
//! - [`model`]: Hamiltonians, level schemes and units,
//! - [`pulses`]: Bernstein envelopes,
//! - [`dynamics`]: RK4 state, propagator and Lindblad evolution,
//! - [`effective`]: the adiabatically eliminated two-level model and
//!   acceleration ratios,
//! - [`metrics`]: Bell fidelity, cost and realistic fidelity,
//! - [`errors`]: deviation sweeps, dephasing, leakage and combined budgets,
//! - [`optimizer`]: the genetic search and batch statistics,
//! - [`scenario`] and [`reproduce`]: the built-in catalog and reference checks.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! [`f64`](mod@f64) and [`f32`](mod@f32) modules hold concrete aliases.
//!
//! Units: angular frequencies in rad/μs, times in μs. Laboratory values
//! quoted as `X/2π` MHz convert with [`model::units::mhz`].

pub mod dynamics;
pub mod effective;
pub mod error;
pub mod errors;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod pulses;
pub mod reproduce;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use metrics::{evaluate_gate, simulate_gate, FidelityMethod, GateResult, SimOptions};
pub use model::{GateParams, Level, LevelScheme};
pub use optimizer::{GAConfig, Variant};
pub use pulses::{GatePulses, PulseSpec};
pub use scalar::{Cplx, Real};
pub use scenario::{scenario, Scenario};

macro_rules! aliases {
    ($name:ident, $t:ty) => {
        #[doc = concat!("Concrete `", stringify!($t), "` aliases.")]
        pub mod $name {
            pub type GateParams = crate::model::GateParams<$t>;
            pub type PulseSpec = crate::pulses::PulseSpec<$t>;
            pub type GatePulses = crate::pulses::GatePulses<$t>;
            pub type GateResult = crate::metrics::GateResult<$t>;
            pub type Trajectory = crate::dynamics::Trajectory<$t>;
            pub type OperatorMatrix = crate::linalg::OperatorMatrix<$t>;
            pub type EffectiveParams = crate::effective::EffectiveParams<$t>;
            pub type ErrorReport = crate::errors::ErrorReport<$t>;
            pub type CombinedBudget = crate::errors::CombinedBudget<$t>;
            pub type RunResult = crate::optimizer::RunResult<$t>;
            pub type BatchStatistics = crate::optimizer::BatchStatistics<$t>;
        }
    };
}

aliases!(f64, f64);
aliases!(f32, f32);
