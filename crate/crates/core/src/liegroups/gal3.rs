use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix5, SMatrix, SVector, Vector3};

use super::so3::{self, hat, Rotation};
use crate::error::LieError;

pub type Vector10 = SVector<f64, 10>;
pub type Matrix10 = SMatrix<f64, 10, 10>;

/// Block offsets inside a gal(3) coordinate vector.
pub const THETA: usize = 0;
pub const NU: usize = 3;
pub const RHO: usize = 6;
pub const TAU: usize = 9;

/// Coordinates of gal(3), ordered `(θ, ν, ρ, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct GalTangent(Vector10);

impl GalTangent {
    pub fn new(theta: Vector3<f64>, nu: Vector3<f64>, rho: Vector3<f64>, tau: f64) -> Self {
        let mut v = Vector10::zeros();
        v.fixed_rows_mut::<3>(THETA).copy_from(&theta);
        v.fixed_rows_mut::<3>(NU).copy_from(&nu);
        v.fixed_rows_mut::<3>(RHO).copy_from(&rho);
        v[TAU] = tau;
        Self(v)
    }

    pub fn zero() -> Self {
        Self(Vector10::zeros())
    }

    pub fn from_vector(v: Vector10) -> Self {
        Self(v)
    }

    /// Inertial input `(ω, a, 0, 1)`.
    pub fn inertial(omega: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self::new(omega, accel, Vector3::zeros(), 1.0)
    }

    pub fn as_vector(&self) -> &Vector10 {
        &self.0
    }

    pub fn theta(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(THETA).into_owned()
    }

    pub fn nu(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(NU).into_owned()
    }

    pub fn rho(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(RHO).into_owned()
    }

    pub fn tau(&self) -> f64 {
        self.0[TAU]
    }

    pub fn wedge(&self) -> Matrix5<f64> {
        let mut m = Matrix5::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.theta()));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.nu());
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.rho());
        m[(3, 4)] = self.tau();
        m
    }

    pub fn vee(m: &Matrix5<f64>) -> Self {
        let omega = so3::vee(&m.fixed_view::<3, 3>(0, 0).into_owned());
        Self::new(
            omega,
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            m.fixed_view::<3, 1>(0, 4).into_owned(),
            m[(3, 4)],
        )
    }

    /// Matrix of the adjoint action `v ↦ [u, v]`.
    pub fn ad(&self) -> Matrix10 {
        let th = hat(&self.theta());
        let mut m = Matrix10::zeros();
        m.fixed_view_mut::<3, 3>(THETA, THETA).copy_from(&th);
        m.fixed_view_mut::<3, 3>(NU, THETA).copy_from(&hat(&self.nu()));
        m.fixed_view_mut::<3, 3>(NU, NU).copy_from(&th);
        m.fixed_view_mut::<3, 3>(RHO, THETA).copy_from(&hat(&self.rho()));
        m.fixed_view_mut::<3, 3>(RHO, NU).copy_from(&(-Matrix3::identity() * self.tau()));
        m.fixed_view_mut::<3, 3>(RHO, RHO).copy_from(&th);
        m.fixed_view_mut::<3, 1>(RHO, TAU).copy_from(&self.nu());
        m
    }
}

impl From<Vector10> for GalTangent {
    fn from(v: Vector10) -> Self {
        Self(v)
    }
}

impl Add for GalTangent {
    type Output = GalTangent;
    fn add(self, rhs: GalTangent) -> GalTangent {
        GalTangent(self.0 + rhs.0)
    }
}

impl AddAssign for GalTangent {
    fn add_assign(&mut self, rhs: GalTangent) {
        self.0 += rhs.0;
    }
}

impl Sub for GalTangent {
    type Output = GalTangent;
    fn sub(self, rhs: GalTangent) -> GalTangent {
        GalTangent(self.0 - rhs.0)
    }
}

impl Neg for GalTangent {
    type Output = GalTangent;
    fn neg(self) -> GalTangent {
        GalTangent(-self.0)
    }
}

impl Mul<f64> for GalTangent {
    type Output = GalTangent;
    fn mul(self, rhs: f64) -> GalTangent {
        GalTangent(self.0 * rhs)
    }
}

/// Left Jacobian `Σ ad^k/(k+1)!` of any matrix group, given the matrix of `ad_u`.
///
/// Stops once a term drops below `1e-14` in Frobenius norm, or after 30 terms.
pub fn ad_series_jacobian<const N: usize>(ad: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let mut term = SMatrix::<f64, N, N>::identity();
    let mut sum = term;
    for k in 1..=30 {
        term = term * ad / (k as f64 + 1.0);
        sum += term;
        if term.norm() < 1e-14 {
            break;
        }
    }
    sum
}

/// Left Jacobian of the Gal(3) exponential: `exp(u + ε) ≈ exp(J_l(u) ε) exp(u)`.
pub fn left_jacobian(u: &GalTangent) -> Matrix10 {
    ad_series_jacobian(&u.ad())
}

/// A Galilean frame `[[R, v, p], [0, 1, t], [0, 0, 1]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GalElement {
    pub rot: Rotation,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
    pub time: f64,
}

impl Default for GalElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl GalElement {
    pub fn new(rot: Rotation, vel: Vector3<f64>, pos: Vector3<f64>, time: f64) -> Self {
        Self { rot, vel, pos, time }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros(), Vector3::zeros(), 0.0)
    }

    pub fn time_shift(time: f64) -> Self {
        Self::new(Rotation::identity(), Vector3::zeros(), Vector3::zeros(), time)
    }

    pub fn compose(&self, y: &GalElement) -> GalElement {
        let a = self.rot.matrix();
        GalElement {
            rot: self.rot * y.rot,
            vel: a * y.vel + self.vel,
            pos: a * y.pos + self.vel * y.time + self.pos,
            time: self.time + y.time,
        }
    }

    pub fn inverse(&self) -> GalElement {
        let at = self.rot.inverse();
        GalElement {
            rot: at,
            vel: -(at * self.vel),
            pos: -(at * (self.pos - self.vel * self.time)),
            time: -self.time,
        }
    }

    pub fn exp(u: &GalTangent) -> GalElement {
        let theta = u.theta();
        let j = so3::left_jacobian(&theta);
        let nu = u.nu();
        GalElement {
            rot: Rotation::exp(&theta),
            vel: j * nu,
            pos: j * u.rho() + so3::second_order(&theta) * nu * u.tau(),
            time: u.tau(),
        }
    }

    pub fn log(&self) -> Result<GalTangent, LieError> {
        let theta = self.rot.log()?;
        let jinv = so3::left_jacobian_inv(&theta);
        let nu = jinv * self.vel;
        let rho = jinv * (self.pos - so3::second_order(&theta) * nu * self.time);
        Ok(GalTangent::new(theta, nu, rho, self.time))
    }

    pub fn adjoint(&self) -> Matrix10 {
        let a = *self.rot.matrix();
        let mut m = Matrix10::zeros();
        m.fixed_view_mut::<3, 3>(THETA, THETA).copy_from(&a);
        m.fixed_view_mut::<3, 3>(NU, THETA).copy_from(&(hat(&self.vel) * a));
        m.fixed_view_mut::<3, 3>(NU, NU).copy_from(&a);
        let shifted = self.pos - self.vel * self.time;
        m.fixed_view_mut::<3, 3>(RHO, THETA).copy_from(&(hat(&shifted) * a));
        m.fixed_view_mut::<3, 3>(RHO, NU).copy_from(&(-a * self.time));
        m.fixed_view_mut::<3, 3>(RHO, RHO).copy_from(&a);
        m.fixed_view_mut::<3, 1>(RHO, TAU).copy_from(&self.vel);
        m[(TAU, TAU)] = 1.0;
        m
    }

    pub fn adjoint_apply(&self, u: &GalTangent) -> GalTangent {
        GalTangent(self.adjoint() * u.0)
    }

    pub fn matrix(&self) -> Matrix5<f64> {
        let mut m = Matrix5::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.vel);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.pos);
        m[(3, 4)] = self.time;
        m
    }

    /// Reads the blocks of a 5×5 embedding; the lower rows are not checked.
    pub fn from_matrix(m: &Matrix5<f64>) -> Self {
        Self {
            rot: Rotation::from_matrix_unchecked(m.fixed_view::<3, 3>(0, 0).into_owned()),
            vel: m.fixed_view::<3, 1>(0, 3).into_owned(),
            pos: m.fixed_view::<3, 1>(0, 4).into_owned(),
            time: m[(3, 4)],
        }
    }

    pub fn renormalized(&self) -> Self {
        Self { rot: self.rot.renormalized(), ..*self }
    }

    pub fn is_finite(&self) -> bool {
        self.rot.matrix().iter().all(|x| x.is_finite())
            && self.vel.iter().all(|x| x.is_finite())
            && self.pos.iter().all(|x| x.is_finite())
            && self.time.is_finite()
    }

    /// Acts on a homogeneous event `(x, t, 1)`: `(R x + v t + p, t + time)`.
    pub fn act_event(&self, x: &Vector3<f64>, t: f64) -> (Vector3<f64>, f64) {
        (self.rot * *x + self.vel * t + self.pos, t + self.time)
    }
}

impl Mul for GalElement {
    type Output = GalElement;
    fn mul(self, rhs: GalElement) -> GalElement {
        self.compose(&rhs)
    }
}
