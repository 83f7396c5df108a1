use nalgebra::DMatrix;
use proptest::prelude::*;
use timecomp_core::dynamics::{find_limit_cycle, CycleOptions, LinearField};
use timecomp_core::{
    integrate, integrate_compactified, Boundary, CompactifiedField, IntegrateOptions, Jet, ProbeOptions, SystemSpec,
    TransformSpec,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_flow_matches_matrix_exponential(
        a in prop::collection::vec(-1.0f64..1.0, 4),
        y0 in prop::collection::vec(-2.0f64..2.0, 2),
        span in 0.5f64..4.0,
    ) {
        let m = DMatrix::from_row_slice(2, 2, &a);
        let f = LinearField { a: m.clone() };
        let traj = integrate(&f, 0.0, &y0, span, IntegrateOptions::with_tol(1e-12)).unwrap();
        let exact = (m * span).exp() * nalgebra::DVector::from_column_slice(&y0);
        let got = traj.final_state();
        prop_assert!((traj.final_time() - span).abs() < 1e-12);
        for i in 0..2 {
            prop_assert!((got[i] - exact[i]).abs() <= 1e-8 * (1.0 + exact[i].abs()), "{:?} vs {}", got, exact);
        }
    }

    #[test]
    fn jet_division_inverts_multiplication(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(0.5f64..2.0, 6),
    ) {
        let ja = Jet::from_coeffs(0.0, a.clone()).unwrap();
        let jb = Jet::from_coeffs(0.0, b).unwrap();
        let back = ja.mul(&jb).unwrap().div(&jb).unwrap();
        for (x, y) in back.coeffs().iter().zip(&a) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }
}

fn vdp_field() -> CompactifiedField {
    let sys = SystemSpec::van_der_pol();
    CompactifiedField::build(&sys, &TransformSpec::arctan(4), 2, false, &ProbeOptions::default()).unwrap()
}

#[test]
fn boundary_planes_are_invariant() {
    let field = vdp_field();
    let orbit = find_limit_cycle(&field, Boundary::Plus, &[2.0, 0.0], None, &CycleOptions::default()).unwrap();
    let traj = integrate_compactified(&field, &orbit.anchor, 1.0, 3.0 * orbit.period, 1e-11).unwrap();
    assert!(traj.states.iter().all(|y| y[2] == 1.0));
    let end = traj.final_state();
    let d = ((end[0] - orbit.anchor[0]).powi(2) + (end[1] - orbit.anchor[1]).powi(2)).sqrt();
    assert!(d < 1e-6, "return distance {d}");
    let traj = integrate_compactified(&field, &[0.5, 0.5], -1.0, 10.0, 1e-10).unwrap();
    assert!(traj.states.iter().all(|y| y[2] == -1.0));
}

#[test]
fn s_clock_is_monotone_and_matches_phi() {
    let field = vdp_field();
    let tr = TransformSpec::arctan(4);
    let traj = integrate_compactified(&field, &[1.0, -1.0], -0.8, 30.0, 1e-11).unwrap();
    let t0 = tr.inverse(-0.8, None).unwrap();
    for w in traj.states.windows(2) {
        assert!(w[1][2] >= w[0][2]);
    }
    for (tau, y) in traj.times.iter().zip(&traj.states) {
        assert!((y[2] - tr.phi(t0 + tau).unwrap()).abs() < 1e-8);
    }
}
