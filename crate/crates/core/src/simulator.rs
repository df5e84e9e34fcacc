//! Analytic trajectory, exact IMU synthesis and delayed GNSS synthesis.
//!
//! Timestamps are kept as integer nanoseconds so that delay bookkeeping is
//! exact; the `f64` second values are derived from them.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::eqf::NavEstimate;
use crate::error::SimError;
use crate::liegroups::{GalTangent, Rotation, Se23Element};
use crate::preintegration::ImuSample;
use crate::GRAVITY;

const NS_PER_S: f64 = 1e9;

pub fn ns_to_s(ns: i64) -> f64 {
    ns as f64 / NS_PER_S
}

pub fn s_to_ns(s: f64) -> i64 {
    (s * NS_PER_S).round() as i64
}

/// Circle with horizontal and vertical waves; yaw follows the horizontal
/// velocity, roll and pitch oscillate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub radius: f64,
    pub angular_rate: f64,
    pub wave_amp_h: f64,
    pub wave_freq_h: f64,
    pub wave_amp_v: f64,
    pub wave_freq_v: f64,
    pub attitude_amp: f64,
    pub attitude_freq: f64,
    pub duration: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            radius: 50.0,
            angular_rate: 0.2,
            wave_amp_h: 5.0,
            wave_freq_h: 0.5,
            wave_amp_v: 3.0,
            wave_freq_v: 0.7,
            attitude_amp: 0.3,
            attitude_freq: 0.4,
            duration: 60.0,
        }
    }
}

impl TrajectoryConfig {
    /// All amplitudes and the radius zero: the vehicle sits at the origin.
    pub fn stationary(duration: f64) -> Self {
        Self {
            radius: 0.0,
            wave_amp_h: 0.0,
            wave_amp_v: 0.0,
            attitude_amp: 0.0,
            duration,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            self.radius,
            self.angular_rate,
            self.wave_amp_h,
            self.wave_freq_h,
            self.wave_amp_v,
            self.wave_freq_v,
            self.attitude_amp,
            self.attitude_freq,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidConfig("trajectory parameters must be finite".into()));
        }
        if !(self.duration > 0.0) {
            return Err(SimError::InvalidConfig("duration must be positive".into()));
        }
        Ok(())
    }
}

/// Spread of the initial navigation estimate around the truth. Each
/// component error is drawn uniformly from `[-w, w]`, per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpread {
    pub attitude: f64,
    pub velocity: f64,
    pub position: f64,
    pub gyro_bias: f64,
    pub accel_bias: f64,
}

impl Default for InitSpread {
    fn default() -> Self {
        Self { attitude: 0.2, velocity: 0.5, position: 1.0, gyro_bias: 0.005, accel_bias: 0.05 }
    }
}

impl InitSpread {
    pub fn zero() -> Self {
        Self { attitude: 0.0, velocity: 0.0, position: 0.0, gyro_bias: 0.0, accel_bias: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub imu_rate: f64,
    pub gnss_rate: f64,
    /// s
    pub delay: f64,
    /// rad/s/√Hz
    pub gyro_noise: f64,
    /// m/s²/√Hz
    pub accel_noise: f64,
    pub gyro_bias_rw: f64,
    pub accel_bias_rw: f64,
    pub gnss_pos_std: f64,
    pub initial_gyro_bias: [f64; 3],
    pub initial_accel_bias: [f64; 3],
    pub lever_arm: [f64; 3],
    pub init: InitSpread,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            imu_rate: 200.0,
            gnss_rate: 20.0,
            delay: 0.1,
            gyro_noise: 0.005,
            accel_noise: 0.05,
            gyro_bias_rw: 1e-4,
            accel_bias_rw: 1e-4,
            gnss_pos_std: 0.5,
            initial_gyro_bias: [0.002, -0.001, 0.0015],
            initial_accel_bias: [0.03, -0.02, 0.04],
            lever_arm: [0.1, 0.0, 0.2],
            init: InitSpread::default(),
            seed: 0,
        }
    }
}

impl SensorConfig {
    /// Noise-free sensors, no bias, truth-centred initial estimate.
    pub fn noise_free(delay: f64) -> Self {
        Self {
            delay,
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias_rw: 0.0,
            accel_bias_rw: 0.0,
            gnss_pos_std: 0.0,
            initial_gyro_bias: [0.0; 3],
            initial_accel_bias: [0.0; 3],
            init: InitSpread::zero(),
            ..Self::default()
        }
    }

    pub fn imu_period_ns(&self) -> i64 {
        s_to_ns(1.0 / self.imu_rate)
    }

    pub fn gnss_period_ns(&self) -> i64 {
        s_to_ns(1.0 / self.gnss_rate)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.imu_rate > 0.0 && self.gnss_rate > 0.0) {
            return Err(SimError::InvalidConfig("sensor rates must be positive".into()));
        }
        if self.gnss_period_ns() % self.imu_period_ns() != 0 {
            return Err(SimError::InvalidConfig("imu_rate must be a multiple of gnss_rate".into()));
        }
        if !(self.delay >= 0.0) {
            return Err(SimError::InvalidConfig("delay must be non-negative".into()));
        }
        let stds = [
            self.gyro_noise,
            self.accel_noise,
            self.gyro_bias_rw,
            self.accel_bias_rw,
            self.gnss_pos_std,
            self.init.attitude,
            self.init.velocity,
            self.init.position,
            self.init.gyro_bias,
            self.init.accel_bias,
        ];
        if stds.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(SimError::InvalidConfig("noise levels must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticState {
    pub rot: Rotation,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
    /// Body angular rate, rad/s.
    pub omega_body: Vector3<f64>,
    /// Specific force in the body frame, m/s².
    pub accel_body: Vector3<f64>,
}

/// Closed-form state and ideal IMU signals at time `t`.
pub fn analytic_state(cfg: &TrajectoryConfig, t: f64) -> Result<AnalyticState, SimError> {
    if !(t >= -1e-9 && t <= cfg.duration + 1e-9) {
        return Err(SimError::TimeOutOfRange { t, duration: cfg.duration });
    }
    let (r, w) = (cfg.radius, cfg.angular_rate);
    let (ah, fh, av, fv) = (cfg.wave_amp_h, cfg.wave_freq_h, cfg.wave_amp_v, cfg.wave_freq_v);
    let (sw, cw) = (w * t).sin_cos();
    let (sh, ch) = (fh * t).sin_cos();
    let (sv, cv) = (fv * t).sin_cos();

    let pos = Vector3::new(r * cw + ah * sh, r * sw, av * sv);
    let vel = Vector3::new(-r * w * sw + ah * fh * ch, r * w * cw, av * fv * cv);
    let acc = Vector3::new(-r * w * w * cw - ah * fh * fh * sh, -r * w * w * sw, -av * fv * fv * sv);

    let speed2 = vel.x * vel.x + vel.y * vel.y;
    let (yaw, yaw_rate) = if speed2 > 1e-18 {
        (vel.y.atan2(vel.x), (vel.x * acc.y - vel.y * acc.x) / speed2)
    } else {
        (0.0, 0.0)
    };
    let (a, f) = (cfg.attitude_amp, cfg.attitude_freq);
    let roll = a * (f * t).sin();
    let roll_rate = a * f * (f * t).cos();
    let pitch = 0.5 * a * (1.3 * f * t).sin();
    let pitch_rate = 0.5 * a * 1.3 * f * (1.3 * f * t).cos();

    let rot = Rotation::from_euler_zyx(yaw, pitch, roll);
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let omega_body = Vector3::new(
        roll_rate - yaw_rate * sp,
        pitch_rate * cr + yaw_rate * cp * sr,
        -pitch_rate * sr + yaw_rate * cp * cr,
    );
    let accel_body = rot.inverse() * (acc - GRAVITY);
    Ok(AnalyticState { rot, vel, pos, omega_body, accel_body })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub rot: Rotation,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
    pub delay: f64,
}

impl TruthSample {
    pub fn navigation(&self) -> NavEstimate {
        NavEstimate {
            pose: Se23Element::new(self.rot, self.vel, self.pos),
            delta: self.delay,
            bias: GalTangent::new(self.gyro_bias, self.accel_bias, Vector3::zeros(), 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnssSample {
    pub arrival_ns: i64,
    pub sampled_ns: i64,
    pub pos: Vector3<f64>,
}

impl GnssSample {
    pub fn t_arrival(&self) -> f64 {
        ns_to_s(self.arrival_ns)
    }

    pub fn t_sampled(&self) -> f64 {
        ns_to_s(self.sampled_ns)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimLog {
    pub seed: u64,
    pub imu_period_ns: i64,
    /// One truth sample per IMU sample.
    pub truth: Vec<TruthSample>,
    pub imu: Vec<ImuSample>,
    pub gnss: Vec<GnssSample>,
    /// Randomized starting estimate for the filters (delay 0).
    pub initial_estimate: NavEstimate,
}

impl SimLog {
    pub fn imu_dt(&self) -> f64 {
        ns_to_s(self.imu_period_ns)
    }
}

fn uniform3(rng: &mut ChaCha20Rng, half_width: f64) -> Vector3<f64> {
    let mut draw = || -> f64 { rng.random_range(-1.0..=1.0) };
    Vector3::new(draw(), draw(), draw()) * half_width
}

fn normal3(rng: &mut ChaCha20Rng, std: f64) -> Vector3<f64> {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    Vector3::new(draw(), draw(), draw()) * std
}

/// Generates one log. Deterministic given `sens.seed`.
pub fn synthesize(traj: &TrajectoryConfig, sens: &SensorConfig) -> Result<SimLog, SimError> {
    traj.validate()?;
    sens.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(sens.seed);
    let dt_ns = sens.imu_period_ns();
    let dt = ns_to_s(dt_ns);
    let duration_ns = s_to_ns(traj.duration);
    let n = (duration_ns / dt_ns) as usize + 1;
    let delay_ns = s_to_ns(sens.delay);

    // Draw the initial estimate first so that it does not depend on the log
    // length.
    let s0 = analytic_state(traj, 0.0)?;
    let init = &sens.init;
    let bg0 = Vector3::from(sens.initial_gyro_bias);
    let ba0 = Vector3::from(sens.initial_accel_bias);
    let initial_estimate = NavEstimate {
        pose: Se23Element::new(
            Rotation::exp(&uniform3(&mut rng, init.attitude)) * s0.rot,
            s0.vel + uniform3(&mut rng, init.velocity),
            s0.pos + uniform3(&mut rng, init.position),
        ),
        delta: 0.0,
        bias: GalTangent::new(
            bg0 + uniform3(&mut rng, init.gyro_bias),
            ba0 + uniform3(&mut rng, init.accel_bias),
            Vector3::zeros(),
            0.0,
        ),
    };

    let gyro_std = sens.gyro_noise * sens.imu_rate.sqrt();
    let accel_std = sens.accel_noise * sens.imu_rate.sqrt();
    let (mut bg, mut ba) = (bg0, ba0);
    let mut truth = Vec::with_capacity(n);
    let mut imu = Vec::with_capacity(n);
    for k in 0..n {
        let t = ns_to_s(k as i64 * dt_ns);
        let s = analytic_state(traj, t)?;
        truth.push(TruthSample { t, rot: s.rot, vel: s.vel, pos: s.pos, gyro_bias: bg, accel_bias: ba, delay: sens.delay });
        imu.push(ImuSample {
            t,
            omega: s.omega_body + bg + normal3(&mut rng, gyro_std),
            accel: s.accel_body + ba + normal3(&mut rng, accel_std),
        });
        bg += normal3(&mut rng, sens.gyro_bias_rw * dt.sqrt());
        ba += normal3(&mut rng, sens.accel_bias_rw * dt.sqrt());
    }

    let p0 = Vector3::from(sens.lever_arm);
    let gnss_ns = sens.gnss_period_ns();
    let mut gnss = Vec::new();
    let mut arrival_ns = 0;
    while arrival_ns <= duration_ns {
        let sampled_ns = arrival_ns - delay_ns;
        if sampled_ns >= 0 {
            let s = analytic_state(traj, ns_to_s(sampled_ns))?;
            let pos = s.pos + s.rot * p0 + normal3(&mut rng, sens.gnss_pos_std);
            gnss.push(GnssSample { arrival_ns, sampled_ns, pos });
        }
        arrival_ns += gnss_ns;
    }

    Ok(SimLog { seed: sens.seed, imu_period_ns: dt_ns, truth, imu, gnss, initial_estimate })
}

/// `n_runs` logs; run `k` uses seed `base_seed + k`.
pub fn monte_carlo(
    traj: &TrajectoryConfig,
    sens: &SensorConfig,
    n_runs: usize,
    base_seed: u64,
) -> Result<Vec<SimLog>, SimError> {
    if n_runs == 0 {
        return Err(SimError::InvalidConfig("n_runs must be at least 1".into()));
    }
    (0..n_runs as u64)
        .map(|k| synthesize(traj, &SensorConfig { seed: base_seed.wrapping_add(k), ..sens.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn starts_on_the_circle() {
        let s = analytic_state(&TrajectoryConfig::default(), 0.0).unwrap();
        assert_relative_eq!(s.pos, Vector3::new(50.0, 0.0, 0.0));
        assert!(analytic_state(&TrajectoryConfig::default(), 61.0).is_err());
    }

    #[test]
    fn hover_measures_gravity_only() {
        let s = analytic_state(&TrajectoryConfig::stationary(10.0), 3.0).unwrap();
        assert_relative_eq!(s.accel_body, -GRAVITY);
        assert_eq!(s.omega_body, Vector3::zeros());
    }

    #[test]
    fn body_rate_matches_rotation_derivative() {
        let cfg = TrajectoryConfig::default();
        let h = 1e-5;
        for &t in &[1.0, 17.3, 42.0] {
            let s = analytic_state(&cfg, t).unwrap();
            let a = analytic_state(&cfg, t - h).unwrap().rot;
            let b = analytic_state(&cfg, t + h).unwrap().rot;
            let rdot = (b.matrix() - a.matrix()) / (2.0 * h);
            let w = crate::liegroups::vee(&(s.rot.matrix().transpose() * rdot));
            assert_relative_eq!(w, s.omega_body, epsilon = 1e-8);
        }
    }

    #[test]
    fn noise_free_log_is_exact() {
        let traj = TrajectoryConfig { duration: 6.0, ..TrajectoryConfig::default() };
        let sens = SensorConfig::noise_free(0.1);
        let log = synthesize(&traj, &sens).unwrap();
        for (imu, truth) in log.imu.iter().zip(&log.truth) {
            let s = analytic_state(&traj, truth.t).unwrap();
            assert_eq!(imu.omega, s.omega_body);
            assert_eq!(imu.accel, s.accel_body);
        }
        let g = log.gnss.iter().find(|g| g.arrival_ns == 5_000_000_000).unwrap();
        assert_eq!(g.sampled_ns, 4_900_000_000);
        let s = analytic_state(&traj, 4.9).unwrap();
        assert_relative_eq!(g.pos, s.pos + s.rot * Vector3::from(sens.lever_arm), epsilon = 1e-12);
        assert_eq!(log.initial_estimate.pose.pos, log.truth[0].pos);
    }

    #[test]
    fn single_run_equals_synthesize() {
        let traj = TrajectoryConfig { duration: 2.0, ..TrajectoryConfig::default() };
        let sens = SensorConfig { seed: 11, ..SensorConfig::default() };
        let mc = monte_carlo(&traj, &sens, 1, 11).unwrap();
        assert_eq!(mc[0], synthesize(&traj, &sens).unwrap());
    }
}
