//! Closed-form numerics for SO(3), SE₂(3), the Galilean group Gal(3) and its
//! left-trivialized tangent group.
//!
//! gal(3) coordinates are ordered `(θ, ν, ρ, τ)`: rotation, velocity,
//! position, time. Left Jacobians follow `exp(u + ε) ≈ exp(J_l(u) ε) exp(u)`.

mod gal3;
mod se23;
mod so3;
mod tangent_group;

pub use gal3::{
    ad_series_jacobian, left_jacobian as gal_left_jacobian, GalElement, GalTangent, Matrix10,
    Vector10, NU, RHO, TAU, THETA,
};
pub use se23::{Matrix9, Se23Element, Vector9};
pub use so3::{
    hat, left_jacobian as so3_left_jacobian, left_jacobian_inv as so3_left_jacobian_inv,
    second_order as so3_second_order, vee, Rotation, LOG_PI_GUARD,
};
pub use tangent_group::{tg_ad, tg_left_jacobian, Matrix20, TangentGroupElement, Vector20};
pub(crate) use tangent_group::join;
