//! Inertial navigation with an unknown GNSS time delay, built on the Galilean
//! group.
//!
//! The crate holds the group numerics, the delay-indexed IMU preintegration
//! buffer, an equivariant filter and EKF baselines, a two-body observer, a
//! trajectory/sensor simulator and the error metrics used to evaluate them.

pub mod ekf;
pub mod eqf;
pub mod error;
pub mod liegroups;
pub mod metrics;
pub mod noise;
pub mod preintegration;
pub mod simulator;
pub mod twobody;

pub use error::{BufferError, FilterError, LieError, MetricsError, SimError};

/// Gravity in the navigation frame, z up.
pub const GRAVITY: nalgebra::Vector3<f64> = nalgebra::Vector3::new(0.0, 0.0, -9.81);
