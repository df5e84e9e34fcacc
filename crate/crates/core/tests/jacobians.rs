mod common;

use common::checks::jacobians;
use common::{rng, tangent, vec20};
use galins::eqf::{error_coordinates, origin_preimage, state_action, SystemState};
use galins::liegroups::TangentGroupElement;

#[test]
fn analytic_jacobians_match_central_differences() {
    let rep = jacobians(20, 1);
    let tight = [
        ("gal left", rep.gal_left),
        ("tangent-group left", rep.tg_left),
        ("eqf A", rep.eqf_a),
        ("eqf B", rep.eqf_b),
        ("eqf C", rep.eqf_c),
        ("eqf C delay column", rep.eqf_c_delay),
        ("ekf propagation", rep.ekf_propagation),
        ("ekf output pose", rep.ekf_h_pose),
    ];
    for (name, err) in tight {
        assert!(err < 1e-4, "{name}: {err}");
    }
    assert!(rep.ekf_h_delay < 1e-3, "ekf output delay: {}", rep.ekf_h_delay);
    assert!(rep.seconds < 30.0);
}

#[test]
fn error_coordinates_are_zero_exactly_at_truth_and_linear_nearby() {
    let mut r = rng(7);
    let xi = SystemState::new(common::gal(&mut r), tangent(&mut r, 0.1));
    let x_hat = origin_preimage(&xi);
    assert!(error_coordinates(&x_hat, &xi).unwrap().norm() < 1e-12);
    let origin = SystemState::default();
    let v = vec20(&mut r, 1.0);
    let eps = |s: f64| error_coordinates(&x_hat, &state_action(&(TangentGroupElement::exp(&(v * s)) * x_hat), &origin)).unwrap();
    let e1 = eps(1e-5);
    assert!((e1 - v * 1e-5).norm() < 1e-12);
    assert!((eps(2e-5) - e1 * 2.0).norm() < 1e-12);
}
