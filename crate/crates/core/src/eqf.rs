//! Equivariant filter for INS with an unknown, constant GNSS delay.
//!
//! The state is `ξ = (F, b)` with `F = Γ(δ) T` the cross-body frame relating
//! the current extended pose `T` to the frame of the delayed GNSS fix, and
//! `b ∈ gal(3)` the input bias (gyro, accel and two virtual blocks). The
//! symmetry group is `Gal(3) ⋉ gal(3)` acting on the right, with origin
//! `ξ̊ = (I, 0)`.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{FilterError, LieError};
use crate::liegroups::{
    gal_left_jacobian, hat, join, GalElement, GalTangent, Matrix10, Matrix20, Se23Element,
    TangentGroupElement, Vector20, NU, RHO, TAU, THETA,
};
use crate::noise::{NoiseParams, PriorSigmas};
use crate::preintegration::{gamma, PreintBuffer, Preintegrated};

pub type Matrix3x20 = SMatrix<f64, 3, 20>;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SystemState {
    pub f: GalElement,
    pub b: GalTangent,
}

impl SystemState {
    pub fn new(f: GalElement, b: GalTangent) -> Self {
        Self { f, b }
    }

    /// Builds `F = Γ(δ) T` from a navigation state.
    pub fn from_navigation(nav: &NavEstimate, g_n: &GalTangent) -> Self {
        Self::new(gamma(nav.delta, g_n) * nav.pose.to_gal(), nav.bias)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputSample {
    /// Measured inertial input `(ω, a, 0, 1)`.
    pub w_n: GalTangent,
    /// Bias random-walk rate; zero for a nominal input.
    pub tau_rw: GalTangent,
}

impl InputSample {
    pub fn imu(omega: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { w_n: GalTangent::inertial(omega, accel), tau_rw: GalTangent::zero() }
    }
}

/// Noise configuration in the form the filter consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Continuous-time density over `(η_w, η_τ)`.
    pub q: Matrix20,
    /// GNSS position covariance.
    pub r: Matrix3<f64>,
    pub p0: Vector3<f64>,
    /// Earth-frame input `(ω_E, -g, 0, 1)`.
    pub g_n: GalTangent,
}

impl From<&NoiseParams> for NoiseConfig {
    fn from(p: &NoiseParams) -> Self {
        Self { q: p.eqf_q(), r: p.gnss_covariance(), p0: p.lever_arm(), g_n: p.g_n() }
    }
}

/// Navigation quantities recovered from a filter state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavEstimate {
    pub pose: Se23Element,
    pub delta: f64,
    pub bias: GalTangent,
}

/// `φ(X, ξ) = (F X_F, Ad_{X_F⁻¹}(b - X_b))`, a right action.
pub fn state_action(x: &TangentGroupElement, xi: &SystemState) -> SystemState {
    SystemState::new(xi.f * x.f, x.f.inverse().adjoint_apply(&(xi.b - x.b)))
}

/// The group element mapping the origin onto `ξ`.
pub fn origin_preimage(xi: &SystemState) -> TangentGroupElement {
    TangentGroupElement::new(xi.f, -xi.f.adjoint_apply(&xi.b))
}

/// Bias estimate `φ(X, ξ̊)_b`.
pub fn bias_of(x: &TangentGroupElement) -> GalTangent {
    -x.f.inverse().adjoint_apply(&x.b)
}

/// Exact discretization of the biased INS over one step:
/// `F' = exp(-g_N dt) F exp((w - b) dt)`, `b' = b + τ dt`.
pub fn system_step(xi: &SystemState, u: &InputSample, g_n: &GalTangent, dt: f64) -> SystemState {
    let f = GalElement::exp(&(*g_n * -dt)) * xi.f * GalElement::exp(&((u.w_n - xi.b) * dt));
    SystemState::new(f, xi.b + u.tau_rw * dt)
}

/// Discrete lift: `φ(Λ(ξ, u), ξ)` is `system_step(ξ, u)`.
pub fn lift(xi: &SystemState, u: &InputSample, g_n: &GalTangent, dt: f64) -> TangentGroupElement {
    let f_inv = xi.f.inverse();
    let lambda_f = GalElement::exp(&(f_inv.adjoint_apply(g_n) * -dt))
        * GalElement::exp(&((u.w_n - xi.b) * dt));
    let lambda_b = xi.b - lambda_f.adjoint_apply(&(xi.b + u.tau_rw * dt));
    TangentGroupElement::new(lambda_f, lambda_b)
}

/// Normal coordinates of the equivariant error, `ε = log(φ_ξ̊⁻¹(φ(X̂⁻¹, ξ)))`.
/// The truth is `φ(exp(ε) X̂, ξ̊)`.
pub fn error_coordinates(x_hat: &TangentGroupElement, truth: &SystemState) -> Result<Vector20, LieError> {
    let e = state_action(&x_hat.inverse(), truth);
    origin_preimage(&e).log()
}

/// State matrix `A` and input matrix `B` of the linearized error dynamics,
/// `ε' ≈ A ε + B η` where the true input is the measured one minus `η`.
pub fn propagation_matrices(
    x_hat: &TangentGroupElement,
    u: &InputSample,
    g_n: &GalTangent,
    dt: f64,
) -> (Matrix20, Matrix20) {
    let ad_f = x_hat.f.adjoint();
    let w_ring = GalTangent::from_vector(ad_f * u.w_n.as_vector()) + x_hat.b;
    let a1 = GalElement::exp(&(*g_n * -dt)).adjoint();
    let a2 = a1 * GalElement::exp(&(w_ring * dt)).adjoint();
    let a1j: Matrix10 = a1 * gal_left_jacobian(&(w_ring * dt)) * dt;

    let mut a = Matrix20::zeros();
    a.fixed_view_mut::<10, 10>(0, 0).copy_from(&a1);
    a.fixed_view_mut::<10, 10>(0, 10).copy_from(&a1j);
    a.fixed_view_mut::<10, 10>(10, 10).copy_from(&a2);

    let mut b = Matrix20::zeros();
    b.fixed_view_mut::<10, 10>(0, 0).copy_from(&(-a1j * ad_f));
    b.fixed_view_mut::<10, 10>(10, 10).copy_from(&(a2 * ad_f * dt));
    (a, b)
}

/// Predicted delayed GNSS position `P(F Υ(δ)⁻¹ ȳ₀)` with `δ` the time slot of
/// `F`, together with the buffer lookup it used.
pub fn measure(
    f: &GalElement,
    buf: &PreintBuffer,
    p0: &Vector3<f64>,
) -> Result<(Vector3<f64>, Preintegrated), FilterError> {
    let q = buf.query(f.time)?;
    let (y, _) = (*f * q.upsilon.inverse()).act_event(p0, 0.0);
    Ok((y, q))
}

/// Output matrix `C` of the linearized measurement at `F̂`.
pub fn output_matrix(f_hat: &GalElement, q: &Preintegrated, p0: &Vector3<f64>) -> Matrix3x20 {
    let ups_inv = q.upsilon.inverse();
    let full = *f_hat * ups_inv;
    let (h, s) = full.act_event(p0, 0.0);
    let omega = q.input.theta();
    let mut c = Matrix3x20::zeros();
    c.fixed_view_mut::<3, 3>(0, THETA).copy_from(&(-hat(&h)));
    c.fixed_view_mut::<3, 3>(0, NU).copy_from(&(Matrix3::identity() * s));
    c.fixed_view_mut::<3, 3>(0, RHO).copy_from(&Matrix3::identity());
    // dΥ⁻¹/dδ = -Υ⁻¹ w^∧, and w^∧ sends ȳ₀ to the direction (ω × p₀, 1, 0).
    let dir = ups_inv.rot * omega.cross(p0) + ups_inv.vel;
    let c2 = -(f_hat.rot * dir + f_hat.vel);
    c.fixed_view_mut::<3, 1>(0, TAU).copy_from(&c2);
    c
}

/// `T̂ = Γ(δ̂)⁻¹ X̂_F`, `δ̂ = X̂_F.time`, and the bias estimate.
pub fn navigation_output(x_hat: &TangentGroupElement, g_n: &GalTangent) -> NavEstimate {
    let delta = x_hat.f.time;
    let t = gamma(delta, g_n).inverse() * x_hat.f;
    debug_assert!(t.time.abs() < 1e-9);
    NavEstimate { pose: Se23Element::from_gal(&t), delta, bias: bias_of(x_hat) }
}

/// Maps independent physical uncertainties of a navigation estimate into a
/// covariance on `ε`.
///
/// To first order a truth `R = exp(θ) R̂`, `v = v̂ + dv`, `p = p̂ + dp`,
/// `δ = δ̂ + dδ`, `b = b̂ + db` has
/// `ε_F = g_N dδ + Ad_{Γ(δ̂)} (θ, dv + v̂ × θ, dp + p̂ × θ, 0)` and
/// `ε_b = -Ad_{F̂} db`. Priors that ignore this structure make the delay look
/// observable through the gravity term.
pub fn physical_prior(nav: &NavEstimate, sig: &PriorSigmas, g_n: &GalTangent) -> Matrix20 {
    let mut pose = Matrix10::zeros();
    let i3 = Matrix3::identity();
    pose.fixed_view_mut::<3, 3>(THETA, 0).copy_from(&i3);
    pose.fixed_view_mut::<3, 3>(NU, 0).copy_from(&hat(&nav.pose.vel));
    pose.fixed_view_mut::<3, 3>(NU, 3).copy_from(&i3);
    pose.fixed_view_mut::<3, 3>(RHO, 0).copy_from(&hat(&nav.pose.pos));
    pose.fixed_view_mut::<3, 3>(RHO, 6).copy_from(&i3);
    let gam = gamma(nav.delta, g_n);
    let f_hat = gam * nav.pose.to_gal();

    let mut j = Matrix20::zeros();
    j.fixed_view_mut::<10, 9>(0, 0).copy_from(&(gam.adjoint() * pose).fixed_view::<10, 9>(0, 0));
    j.fixed_view_mut::<10, 1>(0, 9).copy_from(g_n.as_vector());
    j.fixed_view_mut::<10, 10>(10, 10).copy_from(&(-f_hat.adjoint()));

    let mut d = [0.0; 20];
    d[0..3].fill(sig.attitude.powi(2));
    d[3..6].fill(sig.velocity.powi(2));
    d[6..9].fill(sig.position.powi(2));
    d[9] = sig.delay.powi(2);
    d[10..13].fill(sig.gyro_bias.powi(2));
    d[13..16].fill(sig.accel_bias.powi(2));
    d[16..19].fill(sig.virtual_position_bias.powi(2));
    d[19] = sig.virtual_time_bias.powi(2);
    let p = Matrix20::from_diagonal(&Vector20::from(d));
    symmetrize(&(j * p * j.transpose()))
}

pub(crate) fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn check_spd<const N: usize>(
    m: &SMatrix<f64, N, N>,
    stage: &'static str,
) -> Result<(), FilterError> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(FilterError::Divergence { stage, detail: "non-finite covariance".into() });
    }
    if m.cholesky().is_none() {
        let min_diag = (0..N).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
        return Err(FilterError::Divergence {
            stage,
            detail: format!("covariance not positive definite (min diagonal {min_diag:e})"),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqfState {
    pub x_hat: TangentGroupElement,
    pub sigma: Matrix20,
    origin: SystemState,
}

impl EqfState {
    pub fn origin(&self) -> &SystemState {
        &self.origin
    }
}

/// Diagnostics of one GNSS update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateReport {
    pub residual: Vector3<f64>,
    /// `rᵀ S⁻¹ r`
    pub innovation_nees: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug)]
pub struct Eqf {
    state: EqfState,
    noise: NoiseConfig,
    buffer: PreintBuffer,
}

impl Eqf {
    /// Starts from `X̂ = φ_ξ̊⁻¹(ξ_init)`.
    pub fn new(
        init: &SystemState,
        sigma: Matrix20,
        noise: NoiseConfig,
        buffer: PreintBuffer,
    ) -> Result<Self, FilterError> {
        let sigma = symmetrize(&sigma);
        check_spd(&sigma, "initialization")?;
        let state = EqfState {
            x_hat: origin_preimage(init),
            sigma,
            origin: SystemState::default(),
        };
        Ok(Self { state, noise, buffer })
    }

    /// Initializes from a navigation estimate and physical prior sigmas.
    pub fn from_navigation(
        nav: &NavEstimate,
        prior: &PriorSigmas,
        noise: NoiseConfig,
        buffer: PreintBuffer,
    ) -> Result<Self, FilterError> {
        let sigma = physical_prior(nav, prior, &noise.g_n);
        Self::new(&SystemState::from_navigation(nav, &noise.g_n), sigma, noise, buffer)
    }

    pub fn state(&self) -> &EqfState {
        &self.state
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn buffer(&self) -> &PreintBuffer {
        &self.buffer
    }

    pub fn estimate(&self) -> SystemState {
        state_action(&self.state.x_hat, &self.state.origin)
    }

    pub fn propagate(&mut self, u: &InputSample, dt: f64) -> Result<(), FilterError> {
        if !(dt > 0.0) {
            return Err(crate::error::BufferError::NonPositiveStep(dt).into());
        }
        let x = self.state.x_hat;
        let (a, b) = propagation_matrices(&x, u, &self.noise.g_n, dt);
        let sigma = a * self.state.sigma * a.transpose() + b * self.noise.q * b.transpose() / dt;
        let sigma = symmetrize(&sigma);
        check_spd(&sigma, "propagation")?;

        let xi = self.estimate();
        let x_new = x * lift(&xi, u, &self.noise.g_n, dt);
        if !x_new.f.is_finite() {
            return Err(FilterError::Divergence { stage: "propagation", detail: "non-finite state".into() });
        }

        // Only the physical biases correct the buffer input, which keeps each
        // entry's time slot equal to its age.
        let b = xi.b;
        let w = GalTangent::inertial(u.w_n.theta() - b.theta(), u.w_n.nu() - b.nu());
        self.buffer.propagate(&w, dt)?;

        self.state.sigma = sigma;
        self.state.x_hat = TangentGroupElement::new(x_new.f.renormalized(), x_new.b);
        Ok(())
    }

    /// Predicted GNSS position and output matrix at the current estimate.
    pub fn measure_model(&self) -> Result<(Vector3<f64>, Matrix3x20, Preintegrated), FilterError> {
        let f = self.state.x_hat.f;
        let (h, q) = measure(&f, &self.buffer, &self.noise.p0)?;
        Ok((h, output_matrix(&f, &q, &self.noise.p0), q))
    }

    pub fn update(&mut self, y_m: &Vector3<f64>) -> Result<UpdateReport, FilterError> {
        let (h, c, q) = self.measure_model()?;
        let r = y_m - h;
        let sigma = self.state.sigma;
        let s = symmetrize(&(c * sigma * c.transpose() + self.noise.r));
        let chol = s.cholesky().ok_or(FilterError::SingularInnovation)?;
        let k: SMatrix<f64, 20, 3> = chol.solve(&(c * sigma)).transpose();
        let delta = k * r;

        let ikc = Matrix20::identity() - k * c;
        let post = ikc * sigma * ikc.transpose() + k * self.noise.r * k.transpose();
        let jl = crate::liegroups::tg_left_jacobian(&delta);
        let post = symmetrize(&(jl * post * jl.transpose()));
        check_spd(&post, "update")?;

        let x_new = TangentGroupElement::exp(&delta) * self.state.x_hat;
        if !x_new.f.is_finite() {
            return Err(FilterError::Divergence { stage: "update", detail: "non-finite state".into() });
        }
        self.state.x_hat = TangentGroupElement::new(x_new.f.renormalized(), x_new.b);
        self.state.sigma = post;
        Ok(UpdateReport { residual: r, innovation_nees: r.dot(&chol.solve(&r)), clamped: q.clamped })
    }

    pub fn navigation_output(&self) -> NavEstimate {
        navigation_output(&self.state.x_hat, &self.noise.g_n)
    }

    pub fn error_coordinates(&self, truth: &SystemState) -> Result<Vector20, LieError> {
        error_coordinates(&self.state.x_hat, truth)
    }
}

/// `(ε_F, ε_b)` as a 20-vector, for building test perturbations.
pub fn stack(eps_f: &GalTangent, eps_b: &GalTangent) -> Vector20 {
    join(eps_f, eps_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroups::Rotation;
    use approx::assert_relative_eq;

    fn sample_state() -> SystemState {
        let f = GalElement::new(
            Rotation::from_euler_zyx(0.3, -0.2, 0.1),
            Vector3::new(3.0, -1.0, 0.5),
            Vector3::new(20.0, 5.0, -2.0),
            0.12,
        );
        let b = GalTangent::new(
            Vector3::new(0.01, -0.02, 0.005),
            Vector3::new(0.1, 0.05, -0.08),
            Vector3::new(1e-3, 0.0, -2e-3),
            1e-4,
        );
        SystemState::new(f, b)
    }

    #[test]
    fn action_axioms_and_origin() {
        let xi = sample_state();
        let id = TangentGroupElement::identity();
        let same = state_action(&id, &xi);
        assert_relative_eq!(same.f.matrix(), xi.f.matrix(), epsilon = 1e-14);
        let x = origin_preimage(&xi);
        let back = state_action(&x, &SystemState::default());
        assert_relative_eq!(back.f.matrix(), xi.f.matrix(), epsilon = 1e-13);
        assert_relative_eq!(back.b.as_vector(), xi.b.as_vector(), epsilon = 1e-13);
    }

    #[test]
    fn lift_without_bias_or_gravity_is_plain_exponential() {
        let xi = SystemState::new(sample_state().f, GalTangent::zero());
        let u = InputSample::imu(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 0.0, 9.0));
        let l = lift(&xi, &u, &GalTangent::zero(), 0.01);
        assert_relative_eq!(l.f.matrix(), GalElement::exp(&(u.w_n * 0.01)).matrix(), epsilon = 1e-14);
        assert!(l.b.as_vector().norm() < 1e-15);
    }

    #[test]
    fn error_is_zero_at_truth() {
        let xi = sample_state();
        let eps = error_coordinates(&origin_preimage(&xi), &xi).unwrap();
        assert!(eps.norm() < 1e-12);
    }

    #[test]
    fn propagation_matrix_tends_to_identity() {
        let x = origin_preimage(&sample_state());
        let u = InputSample::imu(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 0.0, 9.0));
        let (a, _) = propagation_matrices(&x, &u, &NoiseParams::default().g_n(), 1e-9);
        assert!((a - Matrix20::identity()).abs().max() < 1e-7);
    }

    #[test]
    fn stationary_delay_column_vanishes() {
        let mut buf = PreintBuffer::new(0.01, 0.5).unwrap();
        let f_spec = Vector3::new(0.0, 0.0, 9.81);
        for _ in 0..30 {
            buf.propagate(&GalTangent::inertial(Vector3::zeros(), f_spec), 0.01).unwrap();
        }
        let g_n = NoiseParams::default().g_n();
        let nav = NavEstimate {
            pose: Se23Element::new(Rotation::identity(), Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0)),
            delta: 0.2,
            bias: GalTangent::zero(),
        };
        let f = SystemState::from_navigation(&nav, &g_n).f;
        let p0 = Vector3::new(0.1, 0.0, 0.2);
        let (h, q) = measure(&f, &buf, &p0).unwrap();
        assert_relative_eq!(h, Vector3::new(1.1, 2.0, 3.2), epsilon = 1e-9);
        let c = output_matrix(&f, &q, &p0);
        assert!(c.column(TAU).norm() < 1e-9);
    }
}
