//! Bernstein-basis pulse envelopes.
//!
//! A shaped laser is described by four coefficients `β₁..β₄` (in MHz, i.e.
//! contributions to `Ω/2π`) over a symmetric Bernstein basis of order `n`:
//!
//! `Ω(t)/2π = Σ_{v=1}^{4} β_v [b_{v,n}(t/T) + b_{n-v,n}(t/T)]`
//!
//! Every term vanishes at both endpoints, and the envelope is mirror
//! symmetric about `T/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::units;
use crate::scalar::Real;

/// Default Bernstein truncation order.
pub const DEFAULT_ORDER: usize = 8;

/// Default number of uniform samples used for peaks and waveform export.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Smallest grid accepted by [`pulse_peak`].
pub const MIN_PEAK_GRID: usize = 1001;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(n,v) x^v (1-x)^(n-v)`.
pub fn bernstein<T: Real>(v: usize, n: usize, x: T) -> Result<T> {
    if v > n {
        return Err(Error::OutOfRange(format!(
            "Bernstein index v={v} exceeds order n={n}"
        )));
    }
    if !x.is_finite() || x < T::zero() || x > T::one() {
        return Err(Error::OutOfRange(format!(
            "Bernstein argument {x} outside [0,1]"
        )));
    }
    Ok(bernstein_unchecked(v, n, x))
}

#[inline]
fn bernstein_unchecked<T: Real>(v: usize, n: usize, x: T) -> T {
    T::lit(binomial(n, v)) * x.powi(v as i32) * (T::one() - x).powi((n - v) as i32)
}

/// One shaped laser: coefficients, truncation order and duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T: Real> {
    /// `β₁..β₄` in MHz (contribution to `Ω/2π`).
    pub beta: [T; 4],
    pub order_n: usize,
    /// Pulse (and gate) duration in μs.
    pub duration: T,
}

impl<T: Real> PulseSpec<T> {
    pub fn new(beta: [T; 4], duration: T) -> Result<Self> {
        Self::with_order(beta, DEFAULT_ORDER, duration)
    }

    pub fn with_order(beta: [T; 4], order_n: usize, duration: T) -> Result<Self> {
        let spec = Self {
            beta,
            order_n,
            duration,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All-zero envelope (laser off) over the given window.
    pub fn off(duration: T) -> Self {
        Self {
            beta: [T::zero(); 4],
            order_n: DEFAULT_ORDER,
            duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "pulse duration must be positive, got {}",
                self.duration
            )));
        }
        if self.order_n < DEFAULT_ORDER || self.order_n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "Bernstein order must be even and at least {DEFAULT_ORDER}, got {}",
                self.order_n
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("pulse coefficient".into()));
        }
        Ok(())
    }

    /// Scales every coefficient, i.e. `Ω(t) -> s Ω(t)`.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            beta: self.beta.map(|b| b * s),
            ..self.clone()
        }
    }

    pub fn is_off(&self) -> bool {
        self.beta.iter().all(|b| b.is_zero())
    }
}

/// `Ω(t)/2π` in MHz; zero outside `[0, T]`.
pub fn pulse_value_mhz<T: Real>(spec: &PulseSpec<T>, t: T) -> T {
    if !(t >= T::zero() && t <= spec.duration) {
        return T::zero();
    }
    let n = spec.order_n;
    let x = t / spec.duration;
    spec.beta
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let v = k + 1;
            b * (bernstein_unchecked(v, n, x) + bernstein_unchecked(n - v, n, x))
        })
        .sum()
}

/// `Ω(t)` in rad/μs; zero outside `[0, T]`.
pub fn pulse_value<T: Real>(spec: &PulseSpec<T>, t: T) -> T {
    units::mhz(pulse_value_mhz(spec, t))
}

/// Maximum of `Ω(t)` (rad/μs) over a uniform grid on `[0, T]`.
pub fn pulse_peak<T: Real>(spec: &PulseSpec<T>, grid_points: usize) -> Result<T> {
    if grid_points < MIN_PEAK_GRID {
        return Err(Error::InvalidParameter(format!(
            "peak search needs at least {MIN_PEAK_GRID} grid points, got {grid_points}"
        )));
    }
    Ok(sample_grid(spec, grid_points)
        .into_iter()
        .map(|(_, w)| w)
        .fold(T::neg_infinity(), T::max))
}

/// Grid time of the sampled maximum.
pub fn pulse_argmax<T: Real>(spec: &PulseSpec<T>, grid_points: usize) -> T {
    sample_grid(spec, grid_points.max(2))
        .into_iter()
        .fold((T::zero(), T::neg_infinity()), |best, (t, w)| {
            if w > best.1 {
                (t, w)
            } else {
                best
            }
        })
        .0
}

fn sample_grid<T: Real>(spec: &PulseSpec<T>, grid_points: usize) -> Vec<(T, T)> {
    let last = T::from_usize_lossy(grid_points - 1);
    (0..grid_points)
        .map(|k| {
            let t = spec.duration * T::from_usize_lossy(k) / last;
            (t, pulse_value(spec, t))
        })
        .collect()
}

/// Same coefficients and order over a new duration.
pub fn rescale_duration<T: Real>(spec: &PulseSpec<T>, new_t: T) -> Result<PulseSpec<T>> {
    if !(new_t.is_finite() && new_t > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "rescaled duration must be positive, got {new_t}"
        )));
    }
    Ok(PulseSpec {
        duration: new_t,
        ..spec.clone()
    })
}

/// CSV waveform with columns `t_us,omega_over_2pi_MHz`.
pub fn waveform_csv<T: Real>(spec: &PulseSpec<T>, grid_points: usize) -> String {
    let mut out = String::from("t_us,omega_over_2pi_MHz\n");
    let last = T::from_usize_lossy(grid_points.max(2) - 1);
    for k in 0..grid_points.max(2) {
        let t = spec.duration * T::from_usize_lossy(k) / last;
        out.push_str(&format!(
            "{:.9e},{:.9e}\n",
            t.to_f64_lossy(),
            pulse_value_mhz(spec, t).to_f64_lossy()
        ));
    }
    out
}

/// The shaped drives of one gate: probe `Ω₁(t)` and optional ancilla `Ω_c(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatePulses<T: Real> {
    pub probe: PulseSpec<T>,
    pub ancilla: Option<PulseSpec<T>>,
}

impl<T: Real> GatePulses<T> {
    pub fn new(probe: PulseSpec<T>, ancilla: Option<PulseSpec<T>>) -> Result<Self> {
        let pulses = Self { probe, ancilla };
        pulses.validate()?;
        Ok(pulses)
    }

    pub fn probe_only(probe: PulseSpec<T>) -> Self {
        Self {
            probe,
            ancilla: None,
        }
    }

    pub fn duration(&self) -> T {
        self.probe.duration
    }

    pub fn validate(&self) -> Result<()> {
        self.probe.validate()?;
        if let Some(anc) = &self.ancilla {
            anc.validate()?;
            if (anc.duration - self.probe.duration).abs() > T::lit(1e-12) * self.probe.duration {
                return Err(Error::InvalidParameter(
                    "probe and ancilla pulses must share one duration".into(),
                ));
            }
        }
        Ok(())
    }

    /// `(Ω₁(t), Ω_c(t))` in rad/μs.
    #[inline]
    pub fn values(&self, t: T) -> (T, T) {
        let probe = pulse_value(&self.probe, t);
        let anc = self
            .ancilla
            .as_ref()
            .map_or(T::zero(), |a| pulse_value(a, t));
        (probe, anc)
    }

    /// Ancilla envelope multiplied by `1 + epsilon`.
    pub fn with_ancilla_scale(&self, epsilon: T) -> Self {
        Self {
            probe: self.probe.clone(),
            ancilla: self
                .ancilla
                .as_ref()
                .map(|a| a.scaled(T::one() + epsilon)),
        }
    }

    /// Both pulses moved to a new duration.
    pub fn rescaled(&self, new_t: T) -> Result<Self> {
        Ok(Self {
            probe: rescale_duration(&self.probe, new_t)?,
            ancilla: self
                .ancilla
                .as_ref()
                .map(|a| rescale_duration(a, new_t))
                .transpose()?,
        })
    }

    /// Peaks `(Ω₁, Ω_c)` in rad/μs on the default grid.
    pub fn peaks(&self) -> (T, T) {
        let p = pulse_peak(&self.probe, DEFAULT_GRID_POINTS).unwrap_or_else(|_| T::zero());
        let a = self
            .ancilla
            .as_ref()
            .map_or(T::zero(), |a| {
                pulse_peak(a, DEFAULT_GRID_POINTS).unwrap_or_else(|_| T::zero())
            });
        (p, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn bernstein_reference_values() {
        assert_eq!(bernstein(0, 8, 0.0f64).unwrap(), 1.0);
        assert_relative_eq!(bernstein(4, 8, 0.5f64).unwrap(), 70.0 / 256.0, epsilon = 1e-15);
        // 28 * 0.25^2 * 0.75^6
        let direct = 28.0 * 0.25f64.powi(2) * 0.75f64.powi(6);
        assert_relative_eq!(bernstein(2, 8, 0.25f64).unwrap(), direct, epsilon = 1e-15);
        assert_relative_eq!(direct, 0.311_462_402_343_75, epsilon = 1e-15);
    }

    #[test]
    fn bernstein_rejects_bad_index_and_argument() {
        assert!(matches!(bernstein(9, 8, 0.5f64), Err(Error::OutOfRange(_))));
        assert!(bernstein(2, 8, 1.5f64).is_err());
    }

    #[test]
    fn endpoints_vanish_and_midpoint_matches_binomials() {
        let spec = PulseSpec::new([1.0, 0.0, 0.0, 0.0], 0.7).unwrap();
        assert_eq!(pulse_value(&spec, 0.0), 0.0);
        assert_eq!(pulse_value(&spec, 0.7), 0.0);
        // b_{1,8}(1/2) + b_{7,8}(1/2) = 16/256
        assert_relative_eq!(pulse_value(&spec, 0.35), TWO_PI * 0.0625, epsilon = 1e-13);
    }

    #[test]
    fn outside_window_is_off() {
        let spec = PulseSpec::new([10.0, 20.0, 30.0, 40.0], 1.0).unwrap();
        assert_eq!(pulse_value(&spec, -0.1), 0.0);
        assert_eq!(pulse_value(&spec, 1.0001), 0.0);
    }

    #[test]
    fn zero_coefficients_have_zero_peak() {
        let spec = PulseSpec::<f64>::off(0.3);
        assert_eq!(pulse_peak(&spec, 2001).unwrap(), 0.0);
        assert!(pulse_peak(&spec, 1000).is_err());
    }

    #[test]
    fn case_three_probe_peak_under_cap() {
        let spec = PulseSpec::new([10.19, 25.47, 6.044, 200.0], 0.25).unwrap();
        let peak_mhz = pulse_peak(&spec, 2001).unwrap() / TWO_PI;
        // midpoint value, computed by hand from the binomials
        let mid = (10.19 * 16.0 + 25.47 * 56.0 + 6.044 * 112.0 + 200.0 * 140.0) / 256.0;
        assert_relative_eq!(peak_mhz, mid, epsilon = 1e-9);
        assert!(peak_mhz <= 200.0 * 1.1);
        assert_relative_eq!(pulse_argmax(&spec, 2001), 0.125, epsilon = 1e-12);
    }

    #[test]
    fn rescaling_preserves_shape() {
        let spec = PulseSpec::new([32.58, 49.19, 52.10, 61.16], 1.0).unwrap();
        let same = rescale_duration(&spec, 1.0).unwrap();
        assert_eq!(same, spec);
        let fast = rescale_duration(&spec, 0.5551).unwrap();
        assert_eq!(fast.beta, spec.beta);
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert_relative_eq!(
                pulse_value(&fast, x * 0.5551),
                pulse_value(&spec, x),
                epsilon = 1e-9
            );
        }
        assert!(rescale_duration(&spec, 0.0).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(PulseSpec::new([1.0; 4], -1.0).is_err());
        assert!(PulseSpec::with_order([1.0; 4], 7, 1.0).is_err());
        assert!(PulseSpec::with_order([1.0; 4], 6, 1.0).is_err());
        assert!(PulseSpec::with_order([1.0; 4], 10, 1.0).is_ok());
        assert!(PulseSpec::new([f64::NAN, 0.0, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn waveform_csv_has_header_and_rows() {
        let spec = PulseSpec::new([1.0, 2.0, 3.0, 4.0], 0.2).unwrap();
        let csv = waveform_csv(&spec, 11);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t_us,omega_over_2pi_MHz");
        assert_eq!(lines.len(), 12);
    }

    #[test]
    fn f32_evaluation_agrees() {
        let s64 = PulseSpec::new([10.0, 20.0, 30.0, 40.0], 0.5).unwrap();
        let s32 = PulseSpec::new([10.0f32, 20.0, 30.0, 40.0], 0.5).unwrap();
        let v64 = pulse_value(&s64, 0.2);
        let v32 = pulse_value(&s32, 0.2f32);
        assert!((v64 - v32 as f64).abs() / v64 < 1e-5);
    }

    proptest! {
        #[test]
        fn symmetric_nonnegative_and_bounded(
            b in proptest::array::uniform4(0.0f64..200.0),
            dur in 0.05f64..2.0,
            x in 0.0f64..1.0,
        ) {
            let spec = PulseSpec::new(b, dur).unwrap();
            let t = x * dur;
            let lhs = pulse_value(&spec, t);
            let rhs = pulse_value(&spec, dur - t);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            prop_assert!(lhs >= 0.0);
            let bmax = b.iter().cloned().fold(0.0, f64::max);
            prop_assert!(lhs / TWO_PI <= 2.0 * bmax + 1e-9);
        }
    }
}
