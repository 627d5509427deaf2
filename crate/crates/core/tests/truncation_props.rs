use cinepipe_core::transition::{
    detect_truncation, synth_tracks, MotionProfile, SynthSpec, TrackSet, TransitionParams, Vec2,
};
use proptest::prelude::*;

/// Independent scan: medians from raw sample lists, then the first offset
/// at or above the threshold.
fn oracle(ts: &TrackSet, negative: bool, params: &TransitionParams) -> usize {
    let at = |samples: &[cinepipe_core::transition::TrackSample], f: i64| {
        samples.iter().find(|s| s.frame == f && s.visible).map(|s| (s.x, s.y))
    };
    for offset in 1..=params.window as i64 {
        let frame = if negative { -offset } else { offset };
        let mut d = vec![];
        for t in &ts.tracks {
            if let (Some(a), Some(p)) = (at(&t.samples, 0), at(&t.samples, frame)) {
                d.push(((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt());
            }
        }
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = d.len();
        let med = if m % 2 == 1 { d[m / 2] } else { (d[m / 2 - 1] + d[m / 2]) / 2.0 };
        if med >= params.tau * ts.height as f64 / 720.0 {
            return offset as usize - 1;
        }
    }
    params.window
}

fn profile() -> impl Strategy<Value = MotionProfile> {
    (0.5..6.0f64, 0.0..std::f64::consts::TAU, prop_oneof![Just(0usize), Just(40), 0..35usize], 0..6usize, 0.0..0.4f64)
        .prop_map(|(speed, angle, stall, ease, jitter)| MotionProfile {
            velocity: Vec2::new(speed * angle.cos(), speed * angle.sin()),
            stall,
            ease,
            floor: 1.0 + jitter + 0.1,
            jitter,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_oracle_and_ground_truth(a in profile(), b in profile(), points in 1..20usize, seed in any::<u64>(), window in 1..=30usize) {
        let spec = SynthSpec { a, b, n_points: points, clip_a_len: 48, clip_b_len: 48, ..SynthSpec::default() };
        let out = synth_tracks(&spec, seed);
        let params = TransitionParams { window, tau: 1.0, ..Default::default() };
        let t = detect_truncation(&out.tracks, &params).unwrap();
        prop_assert_eq!(t.cut_a, oracle(&out.tracks, true, &params));
        prop_assert_eq!(t.cut_b, oracle(&out.tracks, false, &params));
        prop_assert_eq!((t.cut_a, t.cut_b), out.truth.cuts(window));
        prop_assert!(t.cut_a <= window && t.cut_b <= window);
        prop_assert_eq!(t.warnings.len(), usize::from(t.cut_a == window) + usize::from(t.cut_b == window));
    }
}

#[test]
fn window_above_cap_is_rejected() {
    let out = synth_tracks(&SynthSpec::default(), 0);
    let params = TransitionParams { window: 31, ..Default::default() };
    assert!(detect_truncation(&out.tracks, &params).is_err());
}
