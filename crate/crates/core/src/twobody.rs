//! Gain-based observer for the cross-body frame between two rigid bodies,
//! fed with delayed relative-pose measurements.
//!
//! With body frames `X_A`, `X_B` driven by `X ← X exp(u dt)`, the cross-body
//! frame is `F(t) = X_A(t - δ)⁻¹ X_B(t)`. Its time slot is the delay, and a
//! relative pose measured at `t - δ` satisfies `T_m = F Υ_B(δ)⁻¹`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{FilterError, LieError};
use crate::liegroups::{GalElement, GalTangent, Matrix10, Rotation, Vector10};
use crate::preintegration::{PreintBuffer, DEFAULT_HORIZON};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObserverState {
    pub f_hat: GalElement,
    pub gain: Matrix10,
}

impl ObserverState {
    pub fn new(f_hat: GalElement, gain: Matrix10) -> Self {
        Self { f_hat, gain }
    }

    pub fn with_scalar_gain(f_hat: GalElement, k: f64) -> Self {
        Self::new(f_hat, Matrix10::identity() * k)
    }

    /// Prediction `F̂ ← exp(-u_a dt) F̂ exp(u_b dt)`; both inputs carry τ = 1.
    pub fn step(&mut self, u_a: &GalTangent, u_b: &GalTangent, dt: f64) {
        self.f_hat = (GalElement::exp(&(*u_a * -dt)) * self.f_hat * GalElement::exp(&(*u_b * dt))).renormalized();
    }

    /// `r = log(T_m Υ(δ̂) F̂⁻¹)`. The time slot of `r` is always zero: the
    /// buffer lookup at `δ̂` cancels the time slot of `F̂⁻¹`.
    pub fn residual(&self, t_meas: &GalElement, buf: &PreintBuffer) -> Result<Vector10, FilterError> {
        let q = buf.query(self.f_hat.time)?;
        Ok(*(*t_meas * q.upsilon * self.f_hat.inverse()).log()?.as_vector())
    }

    /// `F̂ ← exp(K r) F̂`.
    pub fn correct(&mut self, r: &Vector10) {
        self.f_hat = GalElement::exp(&GalTangent::from_vector(self.gain * r)) * self.f_hat;
    }

    /// `T̂ = Γ_A(δ̂)⁻¹ F̂` for a body A with constant input `u_a`.
    pub fn current_pose(&self, u_a: &GalTangent) -> GalElement {
        GalElement::exp(&(*u_a * self.f_hat.time)).inverse() * self.f_hat
    }

    /// `‖log(F̂⁻¹ F)‖`.
    pub fn error_norm(&self, truth: &GalElement) -> Result<f64, LieError> {
        Ok((self.f_hat.inverse() * *truth).log()?.as_vector().norm())
    }
}

/// Noise-free two-body scenario: body A has a constant input, body B a
/// smoothly varying one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoBodyConfig {
    pub dt: f64,
    pub delay: f64,
    pub duration: f64,
    pub meas_rate: f64,
    pub gain: f64,
    pub horizon: f64,
    /// Initial attitude error, rad.
    pub init_attitude_error: f64,
    pub init_velocity_error: f64,
    pub init_position_error: f64,
}

impl Default for TwoBodyConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            delay: 0.1,
            duration: 30.0,
            meas_rate: 20.0,
            gain: 0.2,
            horizon: DEFAULT_HORIZON,
            init_attitude_error: 0.3,
            init_velocity_error: 0.5,
            init_position_error: 1.0,
        }
    }
}

impl TwoBodyConfig {
    pub fn input_a(&self) -> GalTangent {
        GalTangent::inertial(Vector3::new(0.0, 0.0, 0.05), Vector3::new(0.2, 0.0, 0.0))
    }

    pub fn input_b(&self, t: f64) -> GalTangent {
        GalTangent::inertial(
            Vector3::new(0.3 * (0.7 * t).sin(), 0.2 * (0.5 * t).cos(), 0.4 * (0.3 * t).sin()),
            Vector3::new((0.4 * t).cos(), 0.5 * (0.9 * t).sin(), 0.3 * (0.2 * t).cos()),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoBodyRecord {
    pub t: f64,
    /// `‖log(F̂⁻¹ F)‖`
    pub error: f64,
    /// Time slot of the current-pose estimate.
    pub pose_time: f64,
}

/// Runs the observer on the scenario. The estimate starts at the true delay
/// with a spatial error only: a gain acting on `r` cannot move `δ̂`.
pub fn run_twobody(cfg: &TwoBodyConfig) -> Result<Vec<TwoBodyRecord>, FilterError> {
    if !(cfg.dt > 0.0 && cfg.duration > 0.0 && cfg.meas_rate > 0.0) {
        return Err(FilterError::InvalidConfig("dt, duration and meas_rate must be positive".into()));
    }
    let lag = (cfg.delay / cfg.dt).round() as usize;
    let meas_every = ((1.0 / cfg.meas_rate) / cfg.dt).round().max(1.0) as usize;
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let u_a = cfg.input_a();

    let mut x_a = vec![GalElement::identity()];
    let mut x_b = vec![GalElement::new(
        Rotation::from_euler_zyx(0.5, 0.1, -0.2),
        Vector3::new(1.0, -0.5, 0.2),
        Vector3::new(3.0, 2.0, -1.0),
        0.0,
    )];
    let mut buf = PreintBuffer::new(cfg.dt, cfg.horizon.max(cfg.delay + cfg.dt))?;
    for k in 0..lag {
        let u_b = cfg.input_b(k as f64 * cfg.dt);
        x_a.push(x_a[k] * GalElement::exp(&(u_a * cfg.dt)));
        x_b.push(x_b[k] * GalElement::exp(&(u_b * cfg.dt)));
        buf.propagate(&u_b, cfg.dt)?;
    }

    let truth = |x_a: &[GalElement], x_b: &[GalElement], k: usize| x_a[k - lag].inverse() * x_b[k];
    let eps0 = GalTangent::new(
        Vector3::new(1.0, -1.0, 0.5).normalize() * cfg.init_attitude_error,
        Vector3::new(-0.3, 1.0, 0.2).normalize() * cfg.init_velocity_error,
        Vector3::new(0.6, 0.2, -1.0).normalize() * cfg.init_position_error,
        0.0,
    );
    let mut obs = ObserverState::with_scalar_gain(GalElement::exp(&eps0) * truth(&x_a, &x_b, lag), cfg.gain);
    let mut records = Vec::with_capacity(steps / meas_every + 1);

    for k in lag..lag + steps {
        let t = k as f64 * cfg.dt;
        let u_b = cfg.input_b(t);
        x_a.push(x_a[k] * GalElement::exp(&(u_a * cfg.dt)));
        x_b.push(x_b[k] * GalElement::exp(&(u_b * cfg.dt)));
        buf.propagate(&u_b, cfg.dt)?;
        obs.step(&u_a, &u_b, cfg.dt);

        let k1 = k + 1;
        if (k1 - lag) % meas_every == 0 {
            let t_meas = x_a[k1 - lag].inverse() * x_b[k1 - lag];
            let r = obs.residual(&t_meas, &buf)?;
            obs.correct(&r);
            records.push(TwoBodyRecord {
                t: k1 as f64 * cfg.dt,
                error: obs.error_norm(&truth(&x_a, &x_b, k1))?,
                pose_time: obs.current_pose(&u_a).time,
            });
        }
    }
    Ok(records)
}
