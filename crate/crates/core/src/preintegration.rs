//! Delay-indexed IMU preintegration.
//!
//! `Υ(δ)` is the intra-body Galilean frame accumulated over the last `δ`
//! seconds of IMU input, and `Γ(δ)` its Earth-frame counterpart under the
//! constant gravity/Earth-rate input.

use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::error::BufferError;
use crate::liegroups::{GalElement, GalTangent};

pub const DEFAULT_HORIZON: f64 = 0.5;

/// Relative tolerance when snapping delays onto the sample grid.
const GRID_TOL: f64 = 1e-9;

/// Earth-frame input `(ω_E, -g, 0, 1)`.
pub fn earth_input(omega_e: Vector3<f64>, gravity: Vector3<f64>) -> GalTangent {
    GalTangent::new(omega_e, -gravity, Vector3::zeros(), 1.0)
}

/// `Γ(δ) = exp(g_N δ)`.
pub fn gamma(delta: f64, g_n: &GalTangent) -> GalElement {
    GalElement::exp(&(*g_n * delta))
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    /// Product of all inputs from this segment's start up to now.
    upsilon: GalElement,
    /// Input applied over the segment itself.
    input: GalTangent,
}

/// Result of a buffer lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preintegrated {
    pub upsilon: GalElement,
    /// The delay actually used, after clamping to the stored span.
    pub delta: f64,
    pub clamped: bool,
    /// Input of the segment containing `t - delta`; `dΥ/dδ = input^∧ Υ`.
    pub input: GalTangent,
}

/// Sliding window of preintegration matrices, newest first.
///
/// Entry `i` covers the interval `[t - (i+1) dt, t]`. The age-0 identity is
/// implicit.
#[derive(Clone, Debug)]
pub struct PreintBuffer {
    segments: VecDeque<Segment>,
    dt: f64,
    horizon: f64,
    capacity: usize,
}

impl PreintBuffer {
    pub fn new(dt: f64, horizon: f64) -> Result<Self, BufferError> {
        if !(dt > 0.0) {
            return Err(BufferError::NonPositiveStep(dt));
        }
        let capacity = ((horizon / dt - GRID_TOL).ceil().max(1.0)) as usize;
        Ok(Self { segments: VecDeque::with_capacity(capacity + 1), dt, horizon, capacity })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of entries, counting the age-0 identity.
    pub fn len(&self) -> usize {
        self.segments.len() + 1
    }

    /// True before the first propagation.
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn max_age(&self) -> f64 {
        self.segments.len() as f64 * self.dt
    }

    /// `(age, Υ)` pairs, newest first, starting with the identity.
    pub fn entries(&self) -> impl Iterator<Item = (f64, GalElement)> + '_ {
        std::iter::once((0.0, GalElement::identity())).chain(
            self.segments
                .iter()
                .enumerate()
                .map(|(i, s)| ((i + 1) as f64 * self.dt, s.upsilon)),
        )
    }

    /// Pushes a fresh identity, right-multiplies every entry by
    /// `exp(w dt)` and evicts entries beyond the horizon. `w.tau()` should be 1
    /// so that each entry's time slot tracks its age.
    pub fn propagate(&mut self, w: &GalTangent, dt: f64) -> Result<(), BufferError> {
        if !(dt > 0.0) {
            return Err(BufferError::NonPositiveStep(dt));
        }
        if (dt - self.dt).abs() > GRID_TOL.max(1e-6 * self.dt) {
            return Err(BufferError::StepMismatch { expected: self.dt, got: dt });
        }
        let step = GalElement::exp(&(*w * dt));
        for s in self.segments.iter_mut() {
            s.upsilon = s.upsilon * step;
        }
        self.segments.push_front(Segment { upsilon: step, input: *w });
        self.segments.truncate(self.capacity);
        Ok(())
    }

    /// `Υ(δ)` with `δ` clamped to `[0, max_age]`.
    ///
    /// Between grid ages the result is the geodesic from the younger entry
    /// `Υ_lo` towards the older one. Because the two differ by one segment,
    /// `Υ_hi = exp(w dt) Υ_lo`, that geodesic `Υ_lo exp(α log(Υ_lo⁻¹ Υ_hi))` is
    /// exactly `exp(α w dt) Υ_lo`, which is what gets evaluated.
    pub fn query(&self, delta: f64) -> Result<Preintegrated, BufferError> {
        if self.segments.is_empty() {
            return Err(BufferError::Empty);
        }
        let max_age = self.max_age();
        let clamped = !(0.0..=max_age).contains(&delta);
        let delta = if delta.is_nan() { 0.0 } else { delta.clamp(0.0, max_age) };

        let s = delta / self.dt;
        let nearest = s.round();
        let (idx, frac) = if (s - nearest).abs() <= GRID_TOL * s.max(1.0) {
            (nearest as usize, 0.0)
        } else {
            (s.floor() as usize, s - s.floor())
        };
        let seg = idx.min(self.segments.len() - 1);
        let input = self.segments[seg].input;
        let lo = if idx == 0 { GalElement::identity() } else { self.segments[idx - 1].upsilon };
        let upsilon = if frac == 0.0 {
            lo
        } else {
            GalElement::exp(&(input * (frac * self.dt))) * lo
        };
        Ok(Preintegrated { upsilon, delta, clamped, input })
    }

    pub fn clear(&mut self) {
        self.segments.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub omega: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn input(&self) -> GalTangent {
        GalTangent::inertial(self.omega, self.accel)
    }
}

/// A run of uniformly spaced IMU samples. Sample `k` is the input over
/// `[t_k, t_k + dt]`.
#[derive(Clone, Debug)]
pub struct ImuWindow {
    samples: Vec<ImuSample>,
    dt: f64,
}

impl ImuWindow {
    pub fn new(samples: Vec<ImuSample>) -> Result<Self, BufferError> {
        if samples.len() < 2 {
            return Err(BufferError::InvalidWindow("need at least two samples".into()));
        }
        let dt = samples[1].t - samples[0].t;
        if !(dt > 0.0) {
            return Err(BufferError::NonPositiveStep(dt));
        }
        for (k, pair) in samples.windows(2).enumerate() {
            let step = pair[1].t - pair[0].t;
            if (step - dt).abs() > 1e-6 * dt {
                return Err(BufferError::InvalidWindow(format!(
                    "spacing {step} at sample {} differs from {dt}",
                    k + 1
                )));
            }
        }
        Ok(Self { samples, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn span(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }
}

/// Ordered product of `exp((w_k - bias) dt)` over the last `⌈δ/dt⌉` samples.
pub fn batch_preintegrate(
    window: &ImuWindow,
    delta: f64,
    bias: &GalTangent,
) -> Result<GalElement, BufferError> {
    let dt = window.dt();
    let n = (delta / dt - GRID_TOL).ceil().max(0.0) as usize;
    let samples = window.samples();
    if n > samples.len() {
        return Err(BufferError::DelayExceedsWindow { requested: delta, span: window.span() });
    }
    Ok(samples[samples.len() - n..]
        .iter()
        .fold(GalElement::identity(), |acc, s| acc * GalElement::exp(&((s.input() - *bias) * dt))))
}
