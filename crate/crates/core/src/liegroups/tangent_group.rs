use std::ops::Mul;

use nalgebra::{SMatrix, SVector};

use super::gal3::{ad_series_jacobian, left_jacobian, GalElement, GalTangent, Matrix10, Vector10};
use crate::error::LieError;

pub type Vector20 = SVector<f64, 20>;
pub type Matrix20 = SMatrix<f64, 20, 20>;

pub(crate) fn split(v: &Vector20) -> (GalTangent, GalTangent) {
    (
        GalTangent::from_vector(v.fixed_rows::<10>(0).into_owned()),
        GalTangent::from_vector(v.fixed_rows::<10>(10).into_owned()),
    )
}

pub(crate) fn join(u: &GalTangent, w: &GalTangent) -> Vector20 {
    let mut v = Vector20::zeros();
    v.fixed_rows_mut::<10>(0).copy_from(u.as_vector());
    v.fixed_rows_mut::<10>(10).copy_from(w.as_vector());
    v
}

/// Element of the semidirect product `Gal(3) ⋉ gal(3)`, where Gal(3) acts on
/// its algebra through the adjoint.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TangentGroupElement {
    pub f: GalElement,
    pub b: GalTangent,
}

impl TangentGroupElement {
    pub fn new(f: GalElement, b: GalTangent) -> Self {
        Self { f, b }
    }

    pub fn identity() -> Self {
        Self::new(GalElement::identity(), GalTangent::zero())
    }

    pub fn compose(&self, y: &TangentGroupElement) -> TangentGroupElement {
        Self::new(self.f * y.f, self.b + self.f.adjoint_apply(&y.b))
    }

    pub fn inverse(&self) -> TangentGroupElement {
        let finv = self.f.inverse();
        Self::new(finv, -finv.adjoint_apply(&self.b))
    }

    /// `exp(u, w) = (exp u, J_l(u) w)`.
    pub fn exp(v: &Vector20) -> TangentGroupElement {
        let (u, w) = split(v);
        let b = GalTangent::from_vector(left_jacobian(&u) * w.as_vector());
        Self::new(GalElement::exp(&u), b)
    }

    pub fn log(&self) -> Result<Vector20, LieError> {
        let u = self.f.log()?;
        let w = left_jacobian(&u)
            .lu()
            .solve(self.b.as_vector())
            .unwrap_or_else(Vector10::zeros);
        Ok(join(&u, &GalTangent::from_vector(w)))
    }

    /// 11×11 embedding `[[Ad_f, b], [0, 1]]`.
    pub fn matrix(&self) -> SMatrix<f64, 11, 11> {
        let mut m = SMatrix::<f64, 11, 11>::identity();
        m.fixed_view_mut::<10, 10>(0, 0).copy_from(&self.f.adjoint());
        m.fixed_view_mut::<10, 1>(0, 10).copy_from(self.b.as_vector());
        m
    }

    pub fn adjoint(&self) -> Matrix20 {
        let ad_f = self.f.adjoint();
        let mut m = Matrix20::zeros();
        m.fixed_view_mut::<10, 10>(0, 0).copy_from(&ad_f);
        m.fixed_view_mut::<10, 10>(10, 0).copy_from(&(self.b.ad() * ad_f));
        m.fixed_view_mut::<10, 10>(10, 10).copy_from(&ad_f);
        m
    }
}

impl Mul for TangentGroupElement {
    type Output = TangentGroupElement;
    fn mul(self, rhs: TangentGroupElement) -> TangentGroupElement {
        self.compose(&rhs)
    }
}

/// Adjoint matrix of the 20-dimensional algebra: `[[ad_u, 0], [ad_w, ad_u]]`.
pub fn tg_ad(v: &Vector20) -> Matrix20 {
    let (u, w) = split(v);
    let ad_u: Matrix10 = u.ad();
    let mut m = Matrix20::zeros();
    m.fixed_view_mut::<10, 10>(0, 0).copy_from(&ad_u);
    m.fixed_view_mut::<10, 10>(10, 0).copy_from(&w.ad());
    m.fixed_view_mut::<10, 10>(10, 10).copy_from(&ad_u);
    m
}

pub fn tg_left_jacobian(v: &Vector20) -> Matrix20 {
    ad_series_jacobian(&tg_ad(v))
}
