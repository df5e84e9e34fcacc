mod common;

use common::checks::{grid_equivalence, interpolation_slope};
use common::{rng, tangent, vec3};
use galins::liegroups::GalTangent;
use galins::preintegration::{batch_preintegrate, ImuSample, ImuWindow, PreintBuffer};
use nalgebra::Vector3;
use proptest::prelude::*;

fn random_window(seed: u64, n: usize, dt: f64) -> ImuWindow {
    let mut r = rng(seed);
    ImuWindow::new(
        (0..n)
            .map(|k| ImuSample {
                t: k as f64 * dt,
                omega: vec3(&mut r, 1.0),
                accel: vec3(&mut r, 4.0) + Vector3::new(0.0, 0.0, 9.81),
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sliding_query_equals_batch_on_grid(seed in any::<u64>(), n in 2usize..200, k in 0usize..100) {
        let dt = 0.005;
        let win = random_window(seed, n, dt);
        let bias = tangent(&mut rng(seed ^ 1), 0.05);
        let bias = GalTangent::new(bias.theta(), bias.nu(), Vector3::zeros(), 0.0);
        let mut buf = PreintBuffer::new(dt, 0.5).unwrap();
        for s in win.samples() {
            buf.propagate(&(s.input() - bias), dt).unwrap();
        }
        let k = k.min(buf.len() - 1);
        let delta = k as f64 * dt;
        let batch = batch_preintegrate(&win, delta, &bias).unwrap();
        let q = buf.query(delta).unwrap();
        prop_assert!(!q.clamped);
        prop_assert!((q.upsilon.matrix() - batch.matrix()).norm() < 1e-9);
    }
}

#[test]
fn sliding_query_equals_batch_at_every_grid_delay() {
    let err = grid_equivalence(50, 30);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn interpolation_error_is_second_order_in_dt() {
    let (slope, errs) = interpolation_slope();
    assert!((slope - 2.0).abs() <= 0.2, "slope {slope}, errors {errs:?}");
}
