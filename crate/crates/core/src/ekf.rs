//! EKF baselines on `SE₂(3) × ℝ⁶ × ℝ`.
//!
//! The pose error is `T = exp(ζ) T̂` (a left-multiplied, right-invariant
//! error), biases and delay are additive. Error-state order:
//! `(θ, ν, ρ, b_ω, b_a, δ)`. The fixed-delay variants keep the δ row and
//! column at zero and use the leading 15×15 block.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector6};

use crate::eqf::{check_spd, symmetrize, InputSample, NavEstimate};
use crate::error::{FilterError, LieError};
use crate::liegroups::{hat, GalElement, GalTangent, Se23Element, Vector9};
use crate::noise::{NoiseParams, PriorSigmas};
use crate::preintegration::{gamma, PreintBuffer, Preintegrated};

pub type Vector16 = SVector<f64, 16>;
pub type Matrix16 = SMatrix<f64, 16, 16>;
pub type Matrix3x16 = SMatrix<f64, 3, 16>;

pub const BIAS: usize = 9;
pub const DELAY: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EkfVariant {
    NoDelay,
    FixedDelay(f64),
    OnlineDelay,
}

impl EkfVariant {
    /// Dimension of the estimated error state.
    pub fn dim(&self) -> usize {
        match self {
            EkfVariant::OnlineDelay => 16,
            _ => 15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EkfState {
    pub t: Se23Element,
    /// `(b_ω, b_a)`
    pub bias: Vector6<f64>,
    pub delta: f64,
    pub sigma: Matrix16,
    pub variant: EkfVariant,
}

/// Truth in EKF coordinates, for error evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EkfTruth {
    pub t: Se23Element,
    pub bias: Vector6<f64>,
    pub delta: f64,
}

fn bias_tangent(b: &Vector6<f64>) -> GalTangent {
    GalTangent::new(b.fixed_rows::<3>(0).into(), b.fixed_rows::<3>(3).into(), Vector3::zeros(), 0.0)
}

/// Pose block of the state transition, `Ad_{exp(-g_N dt)}` restricted to the
/// isochronous coordinates, and the bias/noise block
/// `-Ad_{T̂'} J_r(ŵ dt) dt` over the (θ, ν) input columns.
pub fn propagation_jacobians(
    t_next: &Se23Element,
    w_hat: &GalTangent,
    g_n: &GalTangent,
    dt: f64,
) -> (SMatrix<f64, 9, 9>, SMatrix<f64, 9, 6>) {
    let phi = GalElement::exp(&(*g_n * -dt)).adjoint().fixed_view::<9, 9>(0, 0).into_owned();
    let jr = crate::liegroups::gal_left_jacobian(&(*w_hat * -dt));
    let g = -(t_next.to_gal().adjoint() * jr * dt);
    (phi, g.fixed_view::<9, 6>(0, 0).into_owned())
}

/// `h = P(Γ(δ) T Υ(δ)⁻¹ ȳ₀)` and its Jacobian in the EKF error coordinates.
pub fn measure(
    t: &Se23Element,
    delta: f64,
    buf: &PreintBuffer,
    p0: &Vector3<f64>,
    g_n: &GalTangent,
) -> Result<(Vector3<f64>, Matrix3x16, Preintegrated), FilterError> {
    let q = buf.query(delta)?;
    let gam = gamma(delta, g_n);
    let ups_inv = q.upsilon.inverse();
    let local = t.to_gal() * ups_inv;
    let (x, s) = local.act_event(p0, 0.0);
    let (y, s_full) = gam.act_event(&x, s);
    let rg = *gam.rot.matrix();

    let mut hm = Matrix3x16::zeros();
    hm.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-rg * hat(&x)));
    hm.fixed_view_mut::<3, 3>(0, 3).copy_from(&(rg * s));
    hm.fixed_view_mut::<3, 3>(0, 6).copy_from(&rg);

    // dΓ/dδ = g_N^∧ Γ and dΥ⁻¹/dδ = -Υ⁻¹ w^∧.
    let d_gamma = g_n.theta().cross(&y) + g_n.nu() * s_full;
    let n = gam * t.to_gal();
    let dir = ups_inv.rot * q.input.theta().cross(p0) + ups_inv.vel;
    let d_ups = -(n.rot * dir + n.vel);
    hm.fixed_view_mut::<3, 1>(0, DELAY).copy_from(&(d_gamma + d_ups));
    Ok((y, hm, q))
}

#[derive(Clone, Debug)]
pub struct Ekf {
    state: EkfState,
    noise: NoiseParams,
    buffer: PreintBuffer,
}

impl Ekf {
    pub fn new(
        nav: &NavEstimate,
        variant: EkfVariant,
        prior: &PriorSigmas,
        noise: NoiseParams,
        buffer: PreintBuffer,
    ) -> Result<Self, FilterError> {
        let delta = match variant {
            EkfVariant::NoDelay => 0.0,
            EkfVariant::FixedDelay(d) => d,
            EkfVariant::OnlineDelay => nav.delta,
        };
        let sigma = physical_prior(&nav.pose, prior, variant);
        check_variant(&sigma, variant, "initialization")?;
        let b = nav.bias;
        let bias = Vector6::new(b.theta().x, b.theta().y, b.theta().z, b.nu().x, b.nu().y, b.nu().z);
        Ok(Self { state: EkfState { t: nav.pose, bias, delta, sigma, variant }, noise, buffer })
    }

    pub fn state(&self) -> &EkfState {
        &self.state
    }

    pub fn buffer(&self) -> &PreintBuffer {
        &self.buffer
    }

    pub fn dim(&self) -> usize {
        self.state.variant.dim()
    }

    pub fn propagate(&mut self, u: &InputSample, dt: f64) -> Result<(), FilterError> {
        if !(dt > 0.0) {
            return Err(crate::error::BufferError::NonPositiveStep(dt).into());
        }
        let g_n = self.noise.g_n();
        let w_hat = u.w_n - bias_tangent(&self.state.bias);
        let t_next = Se23Element::from_gal(
            &(GalElement::exp(&(g_n * -dt)) * self.state.t.to_gal() * GalElement::exp(&(w_hat * dt))),
        );
        let (phi9, g) = propagation_jacobians(&t_next, &w_hat, &g_n, dt);

        let mut phi = Matrix16::identity();
        phi.fixed_view_mut::<9, 9>(0, 0).copy_from(&phi9);
        phi.fixed_view_mut::<9, 6>(0, BIAS).copy_from(&g);

        let p = &self.noise;
        let qw = Vector6::new(
            p.gyro_noise.powi(2),
            p.gyro_noise.powi(2),
            p.gyro_noise.powi(2),
            p.accel_noise.powi(2),
            p.accel_noise.powi(2),
            p.accel_noise.powi(2),
        );
        let mut noise = Matrix16::zeros();
        noise.fixed_view_mut::<9, 9>(0, 0).copy_from(&(g * SMatrix::<f64, 6, 6>::from_diagonal(&qw) * g.transpose() / dt));
        for i in 0..3 {
            noise[(BIAS + i, BIAS + i)] = p.gyro_bias_rw.powi(2) * dt;
            noise[(BIAS + 3 + i, BIAS + 3 + i)] = p.accel_bias_rw.powi(2) * dt;
        }
        if self.state.variant == EkfVariant::OnlineDelay {
            noise[(DELAY, DELAY)] = p.delay_rw.powi(2) * dt;
        }
        let sigma = symmetrize(&(phi * self.state.sigma * phi.transpose() + noise));
        check_variant(&sigma, self.state.variant, "propagation")?;

        let w_buf = GalTangent::inertial(w_hat.theta(), w_hat.nu());
        self.buffer.propagate(&w_buf, dt)?;
        self.state.t = t_next.renormalized();
        self.state.sigma = sigma;
        Ok(())
    }

    pub fn measure_model(&self) -> Result<(Vector3<f64>, Matrix3x16, Preintegrated), FilterError> {
        let g_n = self.noise.g_n();
        let (y, mut hm, q) = measure(&self.state.t, self.state.delta, &self.buffer, &self.noise.lever_arm(), &g_n)?;
        if self.state.variant != EkfVariant::OnlineDelay {
            hm.column_mut(DELAY).fill(0.0);
        }
        Ok((y, hm, q))
    }

    pub fn update(&mut self, y_m: &Vector3<f64>) -> Result<crate::eqf::UpdateReport, FilterError> {
        let (h, hm, q) = self.measure_model()?;
        let r = y_m - h;
        let rcov = self.noise.gnss_covariance();
        let sigma = self.state.sigma;
        let s = symmetrize(&(hm * sigma * hm.transpose() + rcov));
        let chol = s.cholesky().ok_or(FilterError::SingularInnovation)?;
        let k: SMatrix<f64, 16, 3> = chol.solve(&(hm * sigma)).transpose();
        let dx = k * r;
        let ikh = Matrix16::identity() - k * hm;
        let post = symmetrize(&(ikh * sigma * ikh.transpose() + k * rcov * k.transpose()));
        check_variant(&post, self.state.variant, "update")?;

        let zeta: Vector9 = dx.fixed_rows::<9>(0).into_owned();
        let t = Se23Element::exp(&zeta) * self.state.t;
        if !t.to_gal().is_finite() {
            return Err(FilterError::Divergence { stage: "update", detail: "non-finite state".into() });
        }
        self.state.t = t.renormalized();
        self.state.bias += dx.fixed_rows::<6>(BIAS);
        if self.state.variant == EkfVariant::OnlineDelay {
            self.state.delta += dx[DELAY];
        }
        self.state.sigma = post;
        Ok(crate::eqf::UpdateReport { residual: r, innovation_nees: r.dot(&chol.solve(&r)), clamped: q.clamped })
    }

    pub fn navigation_output(&self) -> NavEstimate {
        NavEstimate { pose: self.state.t, delta: self.state.delta, bias: bias_tangent(&self.state.bias) }
    }

    /// `(ζ, db, dδ)` with `T = exp(ζ) T̂`.
    pub fn error_coordinates(&self, truth: &EkfTruth) -> Result<Vector16, LieError> {
        error_coordinates(&self.state, truth)
    }

    /// Covariance of the estimated sub-state (15 or 16 dimensional).
    pub fn active_covariance(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        self.state.sigma.view((0, 0), (n, n)).into_owned()
    }
}

pub fn error_coordinates(state: &EkfState, truth: &EkfTruth) -> Result<Vector16, LieError> {
    let zeta = (truth.t * state.t.inverse()).log()?;
    let mut e = Vector16::zeros();
    e.fixed_rows_mut::<9>(0).copy_from(&zeta);
    e.fixed_rows_mut::<6>(BIAS).copy_from(&(truth.bias - state.bias));
    e[DELAY] = truth.delta - state.delta;
    Ok(e)
}

fn check_variant(sigma: &Matrix16, variant: EkfVariant, stage: &'static str) -> Result<(), FilterError> {
    match variant {
        EkfVariant::OnlineDelay => check_spd(sigma, stage),
        _ => check_spd(&sigma.fixed_view::<15, 15>(0, 0).into_owned(), stage),
    }
}

/// Prior covariance from independent physical sigmas, using the same
/// first-order map as the EqF: `ζ ≈ (θ, dv + v̂ × θ, dp + p̂ × θ)`.
pub fn physical_prior(pose: &Se23Element, sig: &PriorSigmas, variant: EkfVariant) -> Matrix16 {
    let i3 = Matrix3::identity();
    let mut j = Matrix16::identity();
    j.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat(&pose.vel));
    j.fixed_view_mut::<3, 3>(6, 0).copy_from(&hat(&pose.pos));
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&i3);
    let mut d = [0.0; 16];
    d[0..3].fill(sig.attitude.powi(2));
    d[3..6].fill(sig.velocity.powi(2));
    d[6..9].fill(sig.position.powi(2));
    d[9..12].fill(sig.gyro_bias.powi(2));
    d[12..15].fill(sig.accel_bias.powi(2));
    if variant == EkfVariant::OnlineDelay {
        d[15] = sig.delay.powi(2);
    }
    symmetrize(&(j * Matrix16::from_diagonal(&Vector16::from(d)) * j.transpose()))
}
