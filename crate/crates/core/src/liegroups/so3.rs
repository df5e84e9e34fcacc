use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::LieError;

/// Below this angle the trigonometric coefficients are evaluated by their
/// Taylor series. The closed forms of `(θ - sin θ)/θ³` and friends lose
/// roughly `1e-16/θ²` relative accuracy, so the switch has to happen well
/// above `1e-6` to keep every coefficient at full precision.
const SERIES_ANGLE: f64 = 0.05;

/// Rotations whose angle is within this distance of pi have no unique
/// principal logarithm.
pub const LOG_PI_GUARD: f64 = 1e-6;

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Coefficients of `I + a Ω + b Ω²`-style expansions in the rotation vector.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Coeffs {
    /// sin θ / θ
    pub a: f64,
    /// (1 - cos θ) / θ²
    pub b: f64,
    /// (θ - sin θ) / θ³
    pub c: f64,
    /// (θ²/2 + cos θ - 1) / θ⁴
    pub d: f64,
}

impl Coeffs {
    pub fn new(theta: f64) -> Self {
        let t2 = theta * theta;
        if theta < SERIES_ANGLE {
            let t4 = t2 * t2;
            let t6 = t4 * t2;
            let t8 = t4 * t4;
            Self {
                a: 1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0 + t8 / 362_880.0,
                b: 0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40_320.0 + t8 / 3_628_800.0,
                c: 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362_880.0 + t8 / 39_916_800.0,
                d: 1.0 / 24.0 - t2 / 720.0 + t4 / 40_320.0 - t6 / 3_628_800.0
                    + t8 / 479_001_600.0,
            }
        } else {
            let (s, c) = theta.sin_cos();
            Self {
                a: s / theta,
                b: (1.0 - c) / t2,
                c: (theta - s) / (t2 * theta),
                d: (0.5 * t2 + c - 1.0) / (t2 * t2),
            }
        }
    }
}

/// Coefficient of Ω² in the inverse left Jacobian of SO(3).
fn inv_jacobian_coeff(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        1.0 / 12.0 + t2 / 720.0 + t4 / 30_240.0 + t4 * t2 / 1_209_600.0
    } else {
        let (s, c) = theta.sin_cos();
        1.0 / (theta * theta) - (1.0 + c) / (2.0 * theta * s)
    }
}

/// `I + a Ω + b Ω²` for a rotation vector.
fn expand(v: &Vector3<f64>, k0: f64, k1: f64, k2: f64) -> Matrix3<f64> {
    let w = hat(v);
    Matrix3::identity() * k0 + w * k1 + w * w * k2
}

/// Left Jacobian of SO(3): `Σ Ω^k/(k+1)!`.
pub fn left_jacobian(v: &Vector3<f64>) -> Matrix3<f64> {
    let k = Coeffs::new(v.norm());
    expand(v, 1.0, k.b, k.c)
}

pub fn left_jacobian_inv(v: &Vector3<f64>) -> Matrix3<f64> {
    expand(v, 1.0, -0.5, inv_jacobian_coeff(v.norm()))
}

/// `Σ Ω^k/(k+2)!`, which couples velocity into position in the Gal(3) and
/// SE₂(3) exponentials.
pub fn second_order(v: &Vector3<f64>) -> Matrix3<f64> {
    let k = Coeffs::new(v.norm());
    expand(v, 0.5, k.c, k.d)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn exp(v: &Vector3<f64>) -> Self {
        let k = Coeffs::new(v.norm());
        Self(expand(v, 1.0, k.a, k.b))
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self::exp(&(axis.normalize() * angle))
    }

    /// Rotation about z, then y, then x: `Rz(yaw) Ry(pitch) Rx(roll)`.
    pub fn from_euler_zyx(yaw: f64, pitch: f64, roll: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sr, cr) = roll.sin_cos();
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        Self(rz * ry * rx)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let skew = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        (0.5 * skew.norm()).atan2(0.5 * (m.trace() - 1.0))
    }

    pub fn log(&self) -> Result<Vector3<f64>, LieError> {
        let m = &self.0;
        let skew = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        let s = 0.5 * skew.norm();
        let c = 0.5 * (m.trace() - 1.0);
        let angle = s.atan2(c);
        if angle > PI - LOG_PI_GUARD {
            return Err(LieError::BranchAmbiguity { angle });
        }
        if angle < SERIES_ANGLE {
            // skew = 2 sin(θ) k, and sin θ / θ comes from the series.
            return Ok(skew * (0.5 / Coeffs::new(angle).a));
        }
        if angle < 2.5 {
            return Ok(skew * (0.5 * angle / s));
        }
        // Near pi the antisymmetric part vanishes; read the axis from the
        // symmetric part (1 - cos θ) k kᵀ and take its sign from `skew`.
        let sym = (m + m.transpose()) * 0.5 - Matrix3::identity() * c;
        let i = (0..3)
            .max_by(|&i, &j| sym[(i, i)].total_cmp(&sym[(j, j)]))
            .unwrap_or(0);
        let mut axis: Vector3<f64> = sym.column(i).into_owned();
        axis.normalize_mut();
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
        Ok(axis * angle)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn act(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Projects back onto SO(3) with one Newton step of the polar
    /// decomposition. Enough to undo floating-point drift.
    pub fn renormalized(&self) -> Self {
        let m = self.0;
        Self(m * (Matrix3::identity() * 3.0 - m.transpose() * m) * 0.5)
    }

    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    /// Hamilton quaternion, scalar first.
    pub fn to_quaternion(&self) -> [f64; 4] {
        let q = nalgebra::UnitQuaternion::from_matrix(&self.0);
        let q = q.into_inner();
        let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
        [sign * q.w, sign * q.i, sign * q.j, sign * q.k]
    }

    pub fn from_quaternion(q: [f64; 4]) -> Self {
        let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            q[0], q[1], q[2], q[3],
        ));
        Self(*uq.to_rotation_matrix().matrix())
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}
