//! Per-step navigation errors, RMSE and NEES.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::eqf::NavEstimate;
use crate::error::MetricsError;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct StepErrors {
    /// rad
    pub are: f64,
    /// m/s
    pub ave: f64,
    /// m
    pub ape: f64,
    /// s
    pub ade: f64,
}

pub fn step_errors(truth: &NavEstimate, est: &NavEstimate) -> StepErrors {
    StepErrors {
        are: (truth.pose.rot.inverse() * est.pose.rot).angle(),
        ave: (truth.pose.vel - est.pose.vel).norm(),
        ape: (truth.pose.pos - est.pose.pos).norm(),
        ade: (truth.delta - est.delta).abs(),
    }
}

/// `√(mean(e²))` over the whole series.
pub fn rmse(errors: &[f64]) -> Result<f64, MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// `εᵀ Σ⁻¹ ε / N`, solved through a Cholesky factor.
pub fn nees<const N: usize>(eps: &SVector<f64, N>, sigma: &SMatrix<f64, N, N>) -> Result<f64, MetricsError> {
    let chol = sigma.cholesky().ok_or(MetricsError::NotPositiveDefinite)?;
    Ok(eps.dot(&chol.solve(eps)) / N as f64)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Linear-interpolated quantile, `q ∈ [0, 1]`.
pub fn quantile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(values[lo] + (values[hi] - values[lo]) * (pos - lo as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub t: f64,
    #[serde(flatten)]
    pub errors: StepErrors,
    /// Missing when the truth lacks biases.
    pub nees: Option<f64>,
    /// A GNSS update happened at this step.
    pub gnss: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub filter: String,
    /// NEES dimension.
    pub dim: usize,
    pub seed: u64,
    pub records: Vec<ErrorRecord>,
}

impl ErrorSeries {
    pub fn new(filter: impl Into<String>, dim: usize, seed: u64) -> Self {
        Self { filter: filter.into(), dim, seed, records: Vec::new() }
    }

    fn column(&self, f: impl Fn(&ErrorRecord) -> f64) -> Vec<f64> {
        self.records.iter().map(f).collect()
    }

    pub fn rmse_are(&self) -> Result<f64, MetricsError> {
        rmse(&self.column(|r| r.errors.are))
    }

    pub fn rmse_ave(&self) -> Result<f64, MetricsError> {
        rmse(&self.column(|r| r.errors.ave))
    }

    pub fn rmse_ape(&self) -> Result<f64, MetricsError> {
        rmse(&self.column(|r| r.errors.ape))
    }

    pub fn rmse_ade(&self) -> Result<f64, MetricsError> {
        rmse(&self.column(|r| r.errors.ade))
    }

    /// NEES values at GNSS instants with `t ≥ from`.
    pub fn gnss_nees_since(&self, from: f64) -> Vec<f64> {
        self.records.iter().filter(|r| r.gnss && r.t >= from).filter_map(|r| r.nees).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroups::{GalTangent, Rotation, Se23Element};
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};

    fn nav(rot: Rotation, delta: f64) -> NavEstimate {
        NavEstimate { pose: Se23Element::new(rot, Vector3::zeros(), Vector3::zeros()), delta, bias: GalTangent::zero() }
    }

    #[test]
    fn step_error_examples() {
        let r = Rotation::from_euler_zyx(0.3, 0.2, -0.1);
        assert_eq!(step_errors(&nav(r, 0.1), &nav(r, 0.1)), StepErrors::default());
        let e = step_errors(&nav(r, 0.12), &nav(r * Rotation::from_euler_zyx(0.1, 0.0, 0.0), 0.09));
        assert_relative_eq!(e.are, 0.1, epsilon = 1e-14);
        assert_relative_eq!(e.ade, 0.03, epsilon = 1e-15);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(rmse(&[3.0, 4.0]).unwrap(), 12.5f64.sqrt());
        assert_relative_eq!(rmse(&[2.5; 7]).unwrap(), 2.5);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn nees_examples() {
        assert_eq!(nees(&Vector3::zeros(), &Matrix3::identity()).unwrap(), 0.0);
        assert_relative_eq!(nees(&Vector3::repeat(1.0), &Matrix3::identity()).unwrap(), 1.0);
        assert!(nees(&Vector3::repeat(1.0), &Matrix3::zeros()).is_err());
    }

    #[test]
    fn median_and_quantile() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(quantile(&mut [0.0, 10.0], 0.25), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
