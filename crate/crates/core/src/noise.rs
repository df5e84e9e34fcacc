//! Noise densities and prior standard deviations shared by the filters.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::liegroups::{GalTangent, Matrix20};
use crate::preintegration::earth_input;

/// Continuous-time noise densities (per √Hz) and the GNSS model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// rad/s/√Hz
    pub gyro_noise: f64,
    /// m/s²/√Hz
    pub accel_noise: f64,
    /// rad/s²/√Hz
    pub gyro_bias_rw: f64,
    /// m/s³/√Hz
    pub accel_bias_rw: f64,
    /// Random walk of the virtual bias in the position slot, m/s/√s.
    pub virtual_position_bias_rw: f64,
    /// Random walk of the virtual bias in the time slot, a delay rate, 1/√s.
    pub virtual_time_bias_rw: f64,
    /// s/√s (1e-3 is a variance density of 1e-6 s²/s), online-delay EKF only.
    pub delay_rw: f64,
    /// m
    pub gnss_pos_std: f64,
    /// GNSS antenna position in the IMU frame, m.
    pub lever_arm: [f64; 3],
    /// rad/s
    pub earth_rate: [f64; 3],
    /// m/s²
    pub gravity: [f64; 3],
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            gyro_noise: 0.005,
            accel_noise: 0.05,
            gyro_bias_rw: 1e-4,
            accel_bias_rw: 1e-4,
            virtual_position_bias_rw: 1e-3,
            virtual_time_bias_rw: 1e-8,
            delay_rw: 1e-3,
            gnss_pos_std: 0.5,
            lever_arm: [0.0; 3],
            earth_rate: [0.0; 3],
            gravity: [0.0, 0.0, -9.81],
        }
    }
}

impl NoiseParams {
    pub fn lever_arm(&self) -> Vector3<f64> {
        Vector3::from(self.lever_arm)
    }

    pub fn g_n(&self) -> GalTangent {
        earth_input(Vector3::from(self.earth_rate), Vector3::from(self.gravity))
    }

    pub fn gnss_covariance(&self) -> Matrix3<f64> {
        Matrix3::identity() * self.gnss_pos_std.powi(2)
    }

    /// Input covariance over `(η_w, η_τ)`. The ρ and τ slots of the inertial
    /// input are structurally noiseless.
    pub fn eqf_q(&self) -> Matrix20 {
        let mut d = [0.0; 20];
        d[0..3].fill(self.gyro_noise.powi(2));
        d[3..6].fill(self.accel_noise.powi(2));
        d[10..13].fill(self.gyro_bias_rw.powi(2));
        d[13..16].fill(self.accel_bias_rw.powi(2));
        d[16..19].fill(self.virtual_position_bias_rw.powi(2));
        d[19] = self.virtual_time_bias_rw.powi(2);
        Matrix20::from_diagonal(&nalgebra::SVector::<f64, 20>::from(d))
    }
}

/// Initial standard deviations of the navigation estimate. The navigation
/// defaults match an error uniform within the simulator's default spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSigmas {
    /// rad, per axis
    pub attitude: f64,
    /// m/s
    pub velocity: f64,
    /// m
    pub position: f64,
    /// s
    pub delay: f64,
    /// rad/s
    pub gyro_bias: f64,
    /// m/s²
    pub accel_bias: f64,
    /// m/s
    pub virtual_position_bias: f64,
    /// s/s
    pub virtual_time_bias: f64,
}

impl Default for PriorSigmas {
    fn default() -> Self {
        let uniform = |w: f64| w / 3f64.sqrt();
        Self {
            attitude: uniform(0.2),
            velocity: uniform(0.5),
            position: uniform(1.0),
            delay: 0.3,
            gyro_bias: uniform(0.005),
            accel_bias: uniform(0.05),
            virtual_position_bias: 1e-2,
            virtual_time_bias: 1e-4,
        }
    }
}
