use cinepipe_core::transition::{hermite_eval, hermite_position, hermite_velocity, BoundaryState, CompositePath, Vec2};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -2000.0..2000.0f64
}

fn state() -> impl Strategy<Value = BoundaryState> {
    (coord(), coord(), coord(), coord())
        .prop_map(|(px, py, vx, vy)| BoundaryState { p: Vec2::new(px, py), v: Vec2::new(vx, vy) })
}

fn rel_err(got: Vec2, want: Vec2) -> f64 {
    (got - want).norm() / want.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn interpolates_endpoints(s0 in state(), s1 in state()) {
        prop_assert!((hermite_position(&s0, &s1, 0.0).unwrap() - s0.p).norm() <= 1e-9);
        prop_assert!((hermite_position(&s0, &s1, 1.0).unwrap() - s1.p).norm() <= 1e-9);
    }

    #[test]
    fn tangents_match_finite_differences(s0 in state(), s1 in state()) {
        let h = 1e-6;
        let fd = |t: f64| (hermite_eval(&s0, &s1, t + h) - hermite_eval(&s0, &s1, t - h)) * (0.5 / h);
        prop_assert!(rel_err(fd(0.0), s0.v) <= 1e-5);
        prop_assert!(rel_err(fd(1.0), s1.v) <= 1e-5);
        prop_assert!(rel_err(hermite_velocity(&s0, &s1, 1.0), s1.v) <= 1e-12);
    }

    #[test]
    fn scale_covariance(s0 in state(), s1 in state(), scale in 0.01..100.0f64, t in 0.0..=1.0f64) {
        let sc = |s: BoundaryState| BoundaryState { p: s.p * scale, v: s.v * scale };
        let a = hermite_position(&sc(s0), &sc(s1), t).unwrap();
        let b = hermite_position(&s0, &s1, t).unwrap() * scale;
        prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn composite_is_c1(s0 in state(), s1 in state(), span in 2.0..64.0f64) {
        let path = CompositePath { s0, s1, span };
        for junction in [0.0, span] {
            prop_assert!((path.velocity(junction, true) - path.velocity(junction, false)).norm() <= 1e-9);
            let left = if junction == 0.0 { s0.p } else { path.position(span) };
            prop_assert!((path.position(junction) - left).norm() <= 1e-9);
        }
    }

    #[test]
    fn outside_unit_interval_rejected(s0 in state(), t in prop_oneof![-10.0..-1e-12f64, 1.0 + 1e-12..10.0f64]) {
        prop_assert!(hermite_position(&s0, &s0, t).is_err());
    }
}
