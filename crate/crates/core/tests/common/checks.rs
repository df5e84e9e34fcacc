//! Measurements behind the acceptance properties. Each returns the worst error
//! it observed, so callers apply their own tolerance and can report the value.

use std::time::Instant;

use galins::ekf::{self, Ekf, EkfVariant, Vector16};
use galins::eqf::{
    error_coordinates, lift, measure, origin_preimage, output_matrix, propagation_matrices, state_action,
    system_step, Eqf, InputSample, NavEstimate, NoiseConfig, SystemState,
};
use galins::liegroups::{
    gal_left_jacobian, tg_ad, tg_left_jacobian, GalElement, GalTangent, Se23Element, TangentGroupElement,
    Vector20, Vector9,
};
use galins::metrics::{step_errors, StepErrors};
use galins::noise::{NoiseParams, PriorSigmas};
use galins::preintegration::{batch_preintegrate, ImuSample, ImuWindow, PreintBuffer};
use galins::simulator::{synthesize, SensorConfig, SimLog, TrajectoryConfig};
use galins::FilterError;
use nalgebra::{SMatrix, SVector, Vector3};
use rand::Rng;

use super::{expm, fd_jacobian, gal, rel_err, rng, tangent, tangent_group, vec20, vec3};

fn gal_dist(a: &GalElement, b: &GalElement) -> f64 {
    (a.matrix() - b.matrix()).norm()
}

fn tg_dist(a: &TangentGroupElement, b: &TangentGroupElement) -> f64 {
    gal_dist(&a.f, &b.f) + (a.b.as_vector() - b.b.as_vector()).norm()
}

/// Tangent-group algebra element in the 11×11 embedding `[[ad_u, w], [0, 0]]`.
pub fn tg_wedge(v: &Vector20) -> SMatrix<f64, 11, 11> {
    let mut m = SMatrix::<f64, 11, 11>::zeros();
    m.fixed_view_mut::<10, 10>(0, 0).copy_from(&tg_ad(v).fixed_view::<10, 10>(0, 0));
    m.fixed_view_mut::<10, 1>(0, 10).copy_from(&v.fixed_rows::<10>(10));
    m
}

#[derive(Debug, Default)]
pub struct GroupLawReport {
    /// Relative to the norm of the product.
    pub associativity: f64,
    pub identity: f64,
    /// Relative to the norm of the element.
    pub inverse: f64,
    pub exp_log: f64,
    /// Relative to the norm of the dense exponential.
    pub exp_dense: f64,
    pub seconds: f64,
}

/// `n` random elements of both Gal(3) and the tangent group.
pub fn group_laws(n: usize, seed: u64) -> GroupLawReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut rep = GroupLawReport::default();
    let (id, tg_id) = (GalElement::identity(), TangentGroupElement::identity());
    for _ in 0..n {
        let (a, b, c) = (gal(&mut r), gal(&mut r), gal(&mut r));
        let lhs = (a * b) * c;
        rep.associativity = rep.associativity.max(gal_dist(&lhs, &(a * (b * c))) / (1.0 + lhs.matrix().norm()));
        rep.identity = rep.identity.max(gal_dist(&(a * id), &a)).max(gal_dist(&(id * a), &a));
        let scale = 1.0 + a.matrix().norm();
        rep.inverse = rep.inverse.max(gal_dist(&(a * a.inverse()), &id) / scale);
        rep.inverse = rep.inverse.max(gal_dist(&(a.inverse() * a), &id) / scale);

        let (a, b, c) = (tangent_group(&mut r), tangent_group(&mut r), tangent_group(&mut r));
        let lhs = (a * b) * c;
        let scale = 1.0 + lhs.f.matrix().norm() + lhs.b.as_vector().norm();
        rep.associativity = rep.associativity.max(tg_dist(&lhs, &(a * (b * c))) / scale);
        rep.identity = rep.identity.max(tg_dist(&(a * tg_id), &a)).max(tg_dist(&(tg_id * a), &a));
        let scale = 1.0 + a.f.matrix().norm() + a.b.as_vector().norm();
        rep.inverse = rep.inverse.max(tg_dist(&(a * a.inverse()), &tg_id) / scale);
        rep.inverse = rep.inverse.max(tg_dist(&(a.inverse() * a), &tg_id) / scale);

        // Rotation angles stay below π so the logarithm is unique.
        let u = tangent(&mut r, 1.7);
        rep.exp_log = rep.exp_log.max((GalElement::exp(&u).log().unwrap().as_vector() - u.as_vector()).norm());
        let g = gal(&mut r);
        rep.exp_log = rep.exp_log.max(gal_dist(&GalElement::exp(&g.log().unwrap()), &g));
        let v = vec20(&mut r, 1.0);
        rep.exp_log = rep.exp_log.max((TangentGroupElement::exp(&v).log().unwrap() - v).norm());

        let u = tangent(&mut r, 1.0);
        let dense = expm(&u.wedge());
        rep.exp_dense = rep.exp_dense.max((GalElement::exp(&u).matrix() - dense).norm() / dense.norm());
        let v = vec20(&mut r, 0.5);
        let dense = expm(&tg_wedge(&v));
        rep.exp_dense = rep.exp_dense.max((TangentGroupElement::exp(&v).matrix() - dense).norm() / dense.norm());
    }
    rep.seconds = start.elapsed().as_secs_f64();
    rep
}

#[derive(Debug, Default)]
pub struct JacobianReport {
    pub gal_left: f64,
    pub tg_left: f64,
    pub eqf_a: f64,
    pub eqf_b: f64,
    pub eqf_c: f64,
    /// Delay column of `C` alone.
    pub eqf_c_delay: f64,
    pub ekf_propagation: f64,
    pub ekf_h_pose: f64,
    /// `∂h/∂δ` through the interpolated buffer.
    pub ekf_h_delay: f64,
    pub seconds: f64,
}

pub fn filled_buffer(rng: &mut impl Rng, dt: f64, n: usize) -> PreintBuffer {
    let mut buf = PreintBuffer::new(dt, 0.5).unwrap();
    for _ in 0..n {
        let w = GalTangent::inertial(vec3(rng, 0.5), vec3(rng, 3.0) + Vector3::new(0.0, 0.0, 9.81));
        buf.propagate(&w, dt).unwrap();
    }
    buf
}

fn col_err<const R: usize, const C: usize>(a: &SMatrix<f64, R, C>, fd: &SMatrix<f64, R, C>, j: usize) -> f64 {
    (a.column(j) - fd.column(j)).norm() / fd.column(j).norm().max(1e-12)
}

/// Relative errors of every analytic Jacobian against central differences,
/// `samples` random linearization points each.
pub fn jacobians(samples: usize, seed: u64) -> JacobianReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut rep = JacobianReport::default();
    let noise = NoiseParams { earth_rate: [1e-4, -2e-4, 7e-5], ..NoiseParams::default() };
    let g_n = noise.g_n();

    for _ in 0..samples {
        let u = tangent(&mut r, 1.0 / 10f64.sqrt());
        let base = GalElement::exp(&u).inverse();
        let fd = fd_jacobian::<10, 10>(1e-6, |e| {
            *(GalElement::exp(&GalTangent::from_vector(u.as_vector() + e)) * base).log().unwrap().as_vector()
        });
        rep.gal_left = rep.gal_left.max(rel_err(&gal_left_jacobian(&u), &fd));

        let v = vec20(&mut r, 0.2);
        let base = TangentGroupElement::exp(&v).inverse();
        let fd = fd_jacobian::<20, 20>(1e-6, |e| (TangentGroupElement::exp(&(v + e)) * base).log().unwrap());
        rep.tg_left = rep.tg_left.max(rel_err(&tg_left_jacobian(&v), &fd));

        // EqF propagation: error after one step against error before and input noise.
        let dt = 0.01;
        let x_hat = TangentGroupElement::new(tangent_group(&mut r).f, tangent(&mut r, 0.05));
        let u = InputSample {
            w_n: GalTangent::inertial(vec3(&mut r, 1.0), vec3(&mut r, 10.0)),
            tau_rw: tangent(&mut r, 0.01),
        };
        let (a, b) = propagation_matrices(&x_hat, &u, &g_n, dt);
        let origin = SystemState::default();
        let x_next = x_hat * lift(&state_action(&x_hat, &origin), &u, &g_n, dt);
        let error_after = |eps: &Vector20, eta: &Vector20| {
            let truth = state_action(&(TangentGroupElement::exp(eps) * x_hat), &origin);
            let true_input = InputSample {
                w_n: u.w_n - GalTangent::from_vector(eta.fixed_rows::<10>(0).into_owned()),
                tau_rw: u.tau_rw - GalTangent::from_vector(eta.fixed_rows::<10>(10).into_owned()),
            };
            error_coordinates(&x_next, &system_step(&truth, &true_input, &g_n, dt)).unwrap()
        };
        let fd_a = fd_jacobian::<20, 20>(1e-6, |e| error_after(e, &Vector20::zeros()));
        let fd_b = fd_jacobian::<20, 20>(1e-6, |e| error_after(&Vector20::zeros(), e));
        rep.eqf_a = rep.eqf_a.max(rel_err(&a, &fd_a));
        rep.eqf_b = rep.eqf_b.max(rel_err(&b, &fd_b));

        // EqF output, at a delay between grid ages where `δ ↦ Υ(δ)` is smooth.
        let buf = filled_buffer(&mut r, dt, 40);
        let p0 = vec3(&mut r, 0.5);
        let mut x_hat = tangent_group(&mut r);
        x_hat.f.time = (r.random_range(2..35) as f64 + r.random_range(0.1..0.9)) * dt;
        let (_, q) = measure(&x_hat.f, &buf, &p0).unwrap();
        let c = output_matrix(&x_hat.f, &q, &p0);
        let fd = fd_jacobian::<3, 20>(1e-7, |e| measure(&(TangentGroupElement::exp(e) * x_hat).f, &buf, &p0).unwrap().0);
        rep.eqf_c = rep.eqf_c.max(rel_err(&c, &fd));
        rep.eqf_c_delay = rep.eqf_c_delay.max(col_err(&c, &fd, 9));

        // EKF propagation over (ζ, δb).
        let g = gal(&mut r);
        let t_hat = Se23Element::new(g.rot, g.vel, g.pos);
        let bias_hat = GalTangent::new(vec3(&mut r, 0.01), vec3(&mut r, 0.1), Vector3::zeros(), 0.0);
        let w_hat = GalTangent::inertial(vec3(&mut r, 1.0), vec3(&mut r, 10.0)) - bias_hat;
        let step = |t: &Se23Element, w: &GalTangent| {
            Se23Element::from_gal(&(GalElement::exp(&(g_n * -dt)) * t.to_gal() * GalElement::exp(&(*w * dt))))
        };
        let t_next = step(&t_hat, &w_hat);
        let (phi, gm) = ekf::propagation_jacobians(&t_next, &w_hat, &g_n, dt);
        let fd = fd_jacobian::<9, 15>(1e-6, |x: &SVector<f64, 15>| -> Vector9 {
            let zeta: Vector9 = x.fixed_rows::<9>(0).into_owned();
            let db = GalTangent::new(x.fixed_rows::<3>(9).into(), x.fixed_rows::<3>(12).into(), Vector3::zeros(), 0.0);
            (step(&(Se23Element::exp(&zeta) * t_hat), &(w_hat - db)) * t_next.inverse()).log().unwrap()
        });
        let mut full = SMatrix::<f64, 9, 15>::zeros();
        full.fixed_view_mut::<9, 9>(0, 0).copy_from(&phi);
        full.fixed_view_mut::<9, 6>(0, 9).copy_from(&gm);
        rep.ekf_propagation = rep.ekf_propagation.max(rel_err(&full, &fd));

        // EKF output, including the Earth-frame term of the delay derivative.
        let dt = 0.005;
        let buf = filled_buffer(&mut r, dt, 100);
        let delta = r.random_range(0.05..0.45) + 0.3 * dt;
        let (_, hm, _) = ekf::measure(&t_hat, delta, &buf, &p0, &g_n).unwrap();
        let fd = fd_jacobian::<3, 16>(1e-7, |x: &Vector16| {
            let zeta: Vector9 = x.fixed_rows::<9>(0).into_owned();
            ekf::measure(&(Se23Element::exp(&zeta) * t_hat), delta + x[15], &buf, &p0, &g_n).unwrap().0
        });
        let pose = hm.fixed_view::<3, 9>(0, 0).into_owned();
        rep.ekf_h_pose = rep.ekf_h_pose.max(rel_err(&pose, &fd.fixed_view::<3, 9>(0, 0).into_owned()));
        rep.ekf_h_delay = rep.ekf_h_delay.max(col_err(&hm, &fd, 15));
    }
    rep.seconds = start.elapsed().as_secs_f64();
    rep
}

pub fn state_dist(a: &SystemState, b: &SystemState) -> f64 {
    (a.f.inverse() * b.f).log().unwrap().as_vector().norm() + (a.b.as_vector() - b.b.as_vector()).norm()
}

pub fn random_input(r: &mut impl Rng) -> InputSample {
    InputSample {
        w_n: GalTangent::inertial(vec3(r, 1.0), vec3(r, 3.0) + Vector3::new(0.0, 0.0, 9.81)),
        tau_rw: tangent(r, 0.01),
    }
}

/// Largest gap between `φ(X_k, ξ̊)`, with `X` driven by the lift, and the
/// directly discretized system over `steps` random inputs and step sizes.
pub fn equivariance_drift(steps: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let g_n = NoiseParams::default().g_n();
    let origin = SystemState::new(gal(&mut r), tangent(&mut r, 0.05));
    let xi0 = SystemState::new(gal(&mut r), tangent(&mut r, 0.05));
    // `φ(X, ξ̊) = φ(P̊ X, o)` for the canonical origin `o`, so `X₀ = P̊⁻¹ P₀`.
    let mut x = origin_preimage(&origin).inverse() * origin_preimage(&xi0);
    let mut xi = xi0;
    let mut worst = state_dist(&state_action(&x, &origin), &xi);
    for _ in 0..steps {
        let u = random_input(&mut r);
        let dt = r.random_range(0.001..0.02);
        x = x * lift(&state_action(&x, &origin), &u, &g_n, dt);
        xi = system_step(&xi, &u, &g_n, dt);
        worst = worst.max(state_dist(&state_action(&x, &origin), &xi));
    }
    worst
}

/// Sliding-buffer query against the batch product at every grid delay, over
/// `windows` random IMU windows with random biases.
pub fn grid_equivalence(windows: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let dt = 0.005;
    let mut worst: f64 = 0.0;
    for _ in 0..windows {
        let n = r.random_range(2..200);
        let samples = (0..n)
            .map(|k| ImuSample {
                t: k as f64 * dt,
                omega: vec3(&mut r, 1.0),
                accel: vec3(&mut r, 4.0) + Vector3::new(0.0, 0.0, 9.81),
            })
            .collect();
        let win = ImuWindow::new(samples).unwrap();
        let bias = GalTangent::new(vec3(&mut r, 0.01), vec3(&mut r, 0.1), Vector3::zeros(), 0.0);
        let mut buf = PreintBuffer::new(dt, 0.5).unwrap();
        for s in win.samples() {
            buf.propagate(&(s.input() - bias), dt).unwrap();
        }
        for k in 0..buf.len() {
            let delta = k as f64 * dt;
            let batch = batch_preintegrate(&win, delta, &bias).unwrap();
            let q = buf.query(delta).unwrap();
            assert!(!q.clamped);
            worst = worst.max((q.upsilon.matrix() - batch.matrix()).norm());
        }
    }
    worst
}

/// Smooth inertial input.
fn smooth_input(t: f64) -> GalTangent {
    GalTangent::inertial(
        Vector3::new(0.8 * (1.3 * t).sin(), -0.5 + 0.4 * (2.1 * t).cos(), 0.6 * (0.7 * t).cos()),
        Vector3::new(2.0 * (1.7 * t).cos(), 1.5 * (0.9 * t).sin(), 9.81 + (2.5 * t).sin()),
    )
}

/// Product of exponentials over `[t0, t1]` with `n` midpoint steps.
fn fine_product(t0: f64, t1: f64, n: usize) -> GalElement {
    let h = (t1 - t0) / n as f64;
    (0..n).fold(GalElement::identity(), |acc, i| acc * GalElement::exp(&(smooth_input(t0 + (i as f64 + 0.5) * h) * h)))
}

/// RMS off-grid query error when the buffer holds each segment's input as a
/// constant, against the continuous-input preintegration.
fn interpolation_error(dt: f64, t_end: f64, refs: &[(f64, GalElement)]) -> f64 {
    let steps = (t_end / dt).round() as usize;
    let mut buf = PreintBuffer::new(dt, 0.5).unwrap();
    for k in 0..steps {
        buf.propagate(&smooth_input((k as f64 + 0.5) * dt), dt).unwrap();
    }
    let sq: f64 = refs
        .iter()
        .map(|(delta, reference)| {
            let q = buf.query(*delta).unwrap();
            assert!(!q.clamped);
            (reference.inverse() * q.upsilon).log().unwrap().as_vector().norm_squared()
        })
        .sum();
    (sq / refs.len() as f64).sqrt()
}

/// Least-squares slope of log error against log dt on a dt-halving sweep,
/// with the errors.
pub fn interpolation_slope() -> (f64, Vec<f64>) {
    let t_end = 1.0;
    // Spread the delays so the position within a segment averages out.
    let refs: Vec<(f64, GalElement)> = (0..40)
        .map(|i| {
            let delta = 0.1 + 0.0073 * i as f64 + 1e-4;
            (delta, fine_product(t_end - delta, t_end, 20_000))
        })
        .collect();
    let dts = [0.02, 0.01, 0.005, 0.0025, 0.00125];
    let errs: Vec<f64> = dts.iter().map(|&dt| interpolation_error(dt, t_end, &refs)).collect();
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxy / sxx, errs)
}

/// Filter noise matching a simulated sensor's lever arm.
pub fn noise_for(sens: &SensorConfig) -> NoiseParams {
    NoiseParams { lever_arm: sens.lever_arm, ..NoiseParams::default() }
}

pub fn eqf(dt: f64, init: &NavEstimate, noise: &NoiseParams) -> Eqf {
    let buf = PreintBuffer::new(dt, 1.0).unwrap();
    Eqf::from_navigation(init, &PriorSigmas::default(), NoiseConfig::from(noise), buf).unwrap()
}

pub trait Filter {
    fn propagate(&mut self, u: &InputSample, dt: f64) -> Result<(), FilterError>;
    fn update(&mut self, y: &Vector3<f64>) -> Result<(), FilterError>;
    fn nav(&self) -> NavEstimate;
}

impl Filter for Eqf {
    fn propagate(&mut self, u: &InputSample, dt: f64) -> Result<(), FilterError> {
        Eqf::propagate(self, u, dt)
    }
    fn update(&mut self, y: &Vector3<f64>) -> Result<(), FilterError> {
        Eqf::update(self, y).map(|_| ())
    }
    fn nav(&self) -> NavEstimate {
        self.navigation_output()
    }
}

impl Filter for Ekf {
    fn propagate(&mut self, u: &InputSample, dt: f64) -> Result<(), FilterError> {
        Ekf::propagate(self, u, dt)
    }
    fn update(&mut self, y: &Vector3<f64>) -> Result<(), FilterError> {
        Ekf::update(self, y).map(|_| ())
    }
    fn nav(&self) -> NavEstimate {
        self.navigation_output()
    }
}

pub fn ekf(dt: f64, init: &NavEstimate, noise: &NoiseParams, variant: EkfVariant) -> Ekf {
    let buf = PreintBuffer::new(dt, 1.0).unwrap();
    Ekf::new(init, variant, &PriorSigmas::default(), noise.clone(), buf).unwrap()
}

/// Runs a filter over the log with trapezoid-averaged inputs, calling `each`
/// after every step with the time, the errors against truth and the filter.
pub fn drive<F: Filter>(log: &SimLog, filter: &mut F, mut each: impl FnMut(f64, StepErrors, &F)) {
    let mut next = log.gnss.partition_point(|g| g.arrival_ns <= 0);
    for k in 1..log.imu.len() {
        let (a, b) = (&log.imu[k - 1], &log.imu[k]);
        let u = InputSample::imu((a.omega + b.omega) * 0.5, (a.accel + b.accel) * 0.5);
        filter.propagate(&u, b.t - a.t).unwrap();
        while next < log.gnss.len() && log.gnss[next].t_arrival() <= b.t + 1e-9 {
            filter.update(&log.gnss[next].pos).unwrap();
            next += 1;
        }
        each(b.t, step_errors(&log.truth[k].navigation(), &filter.nav()), filter);
    }
}

/// Worst delay and position error after `settle` seconds, exact sensors,
/// `δ̂₀ = 0`, and the wall time of the run.
pub fn noise_free_convergence(delay: f64, duration: f64, settle: f64) -> (f64, f64, f64) {
    let start = Instant::now();
    let traj = TrajectoryConfig { duration, ..TrajectoryConfig::default() };
    let sens = SensorConfig::noise_free(delay);
    let log = synthesize(&traj, &sens).unwrap();
    let init = NavEstimate { delta: 0.0, ..log.initial_estimate };
    let mut f = eqf(log.imu_dt(), &init, &noise_for(&sens));
    let (mut ade, mut ape): (f64, f64) = (0.0, 0.0);
    drive(&log, &mut f, |t, e, _| {
        if t >= settle {
            ade = ade.max(e.ade);
            ape = ape.max(e.ape);
        }
    });
    (ade, ape, start.elapsed().as_secs_f64())
}

/// Final over initial EqF delay variance on a stationary log. The delay is
/// the time slot of `F`, whose error is the last core coordinate.
pub fn stationary_delay_variance_ratio(sens: &SensorConfig, duration: f64) -> f64 {
    let log = synthesize(&TrajectoryConfig::stationary(duration), sens).unwrap();
    let mut f = eqf(log.imu_dt(), &log.initial_estimate, &noise_for(sens));
    let initial = f.state().sigma[(9, 9)];
    drive(&log, &mut f, |_, _, _| {});
    f.state().sigma[(9, 9)] / initial
}
