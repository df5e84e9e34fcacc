use std::ops::Mul;

use nalgebra::{SMatrix, SVector, Vector3};

use super::gal3::{GalElement, GalTangent};
use super::so3::Rotation;
use crate::error::LieError;

pub type Vector9 = SVector<f64, 9>;
pub type Matrix9 = SMatrix<f64, 9, 9>;

fn to_gal_tangent(v: &Vector9) -> GalTangent {
    let mut u = super::gal3::Vector10::zeros();
    u.fixed_rows_mut::<9>(0).copy_from(v);
    GalTangent::from_vector(u)
}

/// Extended pose: an isochronous Galilean frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se23Element {
    pub rot: Rotation,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
}

impl Default for Se23Element {
    fn default() -> Self {
        Self::identity()
    }
}

impl Se23Element {
    pub fn new(rot: Rotation, vel: Vector3<f64>, pos: Vector3<f64>) -> Self {
        Self { rot, vel, pos }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros(), Vector3::zeros())
    }

    pub fn to_gal(&self) -> GalElement {
        GalElement::new(self.rot, self.vel, self.pos, 0.0)
    }

    /// Drops the time slot of a Galilean frame.
    pub fn from_gal(g: &GalElement) -> Self {
        Self::new(g.rot, g.vel, g.pos)
    }

    pub fn compose(&self, y: &Se23Element) -> Se23Element {
        Self::from_gal(&self.to_gal().compose(&y.to_gal()))
    }

    pub fn inverse(&self) -> Se23Element {
        Self::from_gal(&self.to_gal().inverse())
    }

    pub fn exp(v: &Vector9) -> Se23Element {
        Self::from_gal(&GalElement::exp(&to_gal_tangent(v)))
    }

    pub fn log(&self) -> Result<Vector9, LieError> {
        let u = self.to_gal().log()?;
        Ok(u.as_vector().fixed_rows::<9>(0).into_owned())
    }

    /// The time-0 block of the Gal(3) adjoint.
    pub fn adjoint(&self) -> Matrix9 {
        self.to_gal().adjoint().fixed_view::<9, 9>(0, 0).into_owned()
    }

    pub fn ad(v: &Vector9) -> Matrix9 {
        to_gal_tangent(v).ad().fixed_view::<9, 9>(0, 0).into_owned()
    }

    pub fn left_jacobian(v: &Vector9) -> Matrix9 {
        super::gal3::ad_series_jacobian(&Self::ad(v))
    }

    /// `J_r(v) = J_l(-v)`, so that `exp(v + ε) ≈ exp(v) exp(J_r(v) ε)`.
    pub fn right_jacobian(v: &Vector9) -> Matrix9 {
        Self::left_jacobian(&(-v))
    }

    pub fn renormalized(&self) -> Self {
        Self { rot: self.rot.renormalized(), ..*self }
    }
}

impl Mul for Se23Element {
    type Output = Se23Element;
    fn mul(self, rhs: Se23Element) -> Se23Element {
        self.compose(&rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn embedding_is_time_zero_gal_element() {
        let v = Vector9::from_iterator((0..9).map(|i| 0.1 * i as f64 - 0.3));
        let x = Se23Element::exp(&v);
        let g = x.to_gal();
        assert_eq!(g.time, 0.0);
        assert_relative_eq!(x.log().unwrap(), v, epsilon = 1e-13);
        let y = Se23Element::exp(&(v * -0.7));
        assert_eq!((x * y).to_gal().time, 0.0);
        assert_relative_eq!((x * x.inverse()).log().unwrap(), Vector9::zeros(), epsilon = 1e-14);
    }
}
