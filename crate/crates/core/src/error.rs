use thiserror::Error;

/// Failures of the group numerics.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LieError {
    /// The rotation angle is too close to pi for the principal logarithm to be
    /// well defined.
    #[error("logarithm is ambiguous at rotation angle {angle} rad (too close to pi)")]
    BranchAmbiguity { angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BufferError {
    #[error("integration step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("integration step {got} does not match buffer step {expected}")]
    StepMismatch { expected: f64, got: f64 },
    #[error("preintegration buffer is empty")]
    Empty,
    #[error("requested delay {requested} s exceeds the window span {span} s")]
    DelayExceedsWindow { requested: f64, span: f64 },
    #[error("imu window is invalid: {0}")]
    InvalidWindow(String),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    /// The covariance lost positive definiteness.
    #[error("filter diverged at {stage}: {detail}")]
    Divergence { stage: &'static str, detail: String },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time {t} s outside the trajectory range [0, {duration}] s")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("cannot summarise an empty series")]
    EmptySeries,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error(transparent)]
    Lie(#[from] LieError),
}
