use quasiavg::rotation::{
    angle_projection, auto_avoid_angle, build_lift, circle_distance, project_trace,
    rotation_number, unwrap_delta, winding_check, AngleVector, UnwrapMode, Winding,
};
use quasiavg::systems::{iterate, SystemSpec, GOLDEN_MEAN};
use quasiavg::{CheckpointSchedule, Error, ObservableTrace, WeightSpec};

fn angle(x: f64) -> AngleVector {
    AngleVector::new(vec![x]).unwrap()
}

fn rotation_angles(rho: f64, theta0: f64, n: usize) -> Vec<AngleVector> {
    let sys = SystemSpec::PureRotation {
        rho: vec![rho],
        theta0: vec![theta0],
    };
    iterate(&sys, n)
        .unwrap()
        .rows()
        .map(|r| angle(r[0]))
        .collect()
}

fn circle(theta0: f64, n: usize) -> ObservableTrace {
    let sys = SystemSpec::ConjugatedCircle {
        rho: GOLDEN_MEAN,
        eps: 0.05,
        theta0,
    };
    iterate(&sys, n).unwrap()
}

#[test]
fn projection_examples() {
    assert_eq!(
        angle_projection([2.0, 0.0], [0.0, 0.0]).unwrap().coords(),
        &[0.0]
    );
    assert_eq!(
        angle_projection([0.0, 3.0], [0.0, 0.0]).unwrap().coords(),
        &[0.25]
    );
    assert_eq!(
        angle_projection([1.0, 1.0], [0.0, 0.0]).unwrap().coords(),
        &[0.125]
    );
    assert!(matches!(
        angle_projection([1.0, 1.0], [1.0, 1.0]),
        Err(Error::DegenerateProjection { .. })
    ));
}

#[test]
fn unwrap_examples() {
    let d = |a, b, m| unwrap_delta(&angle(a), &angle(b), m)[0];
    assert!((d(0.9, 0.1, UnwrapMode::ShortestArc) - 0.2).abs() < 1e-15);
    assert!((d(0.1, 0.9, UnwrapMode::PositiveArc) - 0.8).abs() < 1e-15);
    assert_eq!(d(0.3, 0.3, UnwrapMode::ShortestArc), 0.0);
    assert_eq!(d(0.3, 0.3, UnwrapMode::PositiveArc), 0.0);
    assert!((d(0.2, 0.4, UnwrapMode::AvoidAngle(-0.5)) - 0.2).abs() < 1e-15);
}

#[test]
fn lift_examples() {
    let a: Vec<_> = [0.0, 0.6, 0.2].into_iter().map(angle).collect();
    let lift = build_lift(&a, UnwrapMode::ShortestArc).unwrap();
    let l: Vec<f64> = (0..3).map(|n| lift.lift(n)[0]).collect();
    assert!(
        (l[1] + 0.4).abs() < 1e-15 && (l[2] + 0.8).abs() < 1e-15,
        "{l:?}"
    );

    let a: Vec<_> = [0.0, 0.25, 0.5, 0.75].into_iter().map(angle).collect();
    let lift = build_lift(&a, UnwrapMode::PositiveArc).unwrap();
    let l: Vec<f64> = (0..4).map(|n| lift.lift(n)[0]).collect();
    assert_eq!(l, vec![0.0, 0.25, 0.5, 0.75]);
}

#[test]
fn pure_rotation_lift_tracks_n_rho() {
    let n = 100_000;
    let lift = build_lift(
        &rotation_angles(GOLDEN_MEAN, 0.0, n),
        UnwrapMode::PositiveArc,
    )
    .unwrap();
    for k in 0..n - 1 {
        assert!((lift.delta(k)[0] - GOLDEN_MEAN).abs() < 1e-12);
    }
    for k in [1usize, 1000, 99_999] {
        assert!((lift.lift(k)[0] - k as f64 * GOLDEN_MEAN).abs() <= 1e-12 * k as f64);
    }
    assert_eq!(lift.max_lift_residual(), 0.0);
}

#[test]
fn slow_rotation_modes_agree() {
    let angles = rotation_angles(0.3, 0.1, 5000);
    let pos = build_lift(&angles, UnwrapMode::PositiveArc).unwrap();
    let short = build_lift(&angles, UnwrapMode::ShortestArc).unwrap();
    for n in 0..angles.len() - 1 {
        assert_eq!(pos.delta(n), short.delta(n));
    }
}

#[test]
fn estimates_agree_mod_one_across_modes() {
    let n = 10_000;
    let angles = rotation_angles(GOLDEN_MEAN, 0.2, n + 1);
    let sched = CheckpointSchedule::single(n).unwrap();
    let rho = |mode| {
        let lift = build_lift(&angles, mode).unwrap();
        rotation_number(&lift, WeightSpec::Exponential, &sched).unwrap()[0].clone()
    };
    let pos = rho(UnwrapMode::PositiveArc);
    let short = rho(UnwrapMode::ShortestArc);
    // shortest arc sees the step as 1 − ρ backwards
    assert!((short.rho_lift[0] - (GOLDEN_MEAN - 1.0)).abs() < 1e-12);
    assert!(circle_distance(pos.rho.coords()[0], short.rho.coords()[0]) < 1e-10);
    assert!((pos.rho.coords()[0] - GOLDEN_MEAN).abs() < 1e-12);
}

#[test]
fn constant_deltas_average_exactly() {
    let c = 0.123_456_789;
    let angles: Vec<_> = (0..1000).map(|n| angle((n as f64 * c).fract())).collect();
    let lift = build_lift(&angles, UnwrapMode::PositiveArc).unwrap();
    let est = rotation_number(
        &lift,
        WeightSpec::Exponential,
        &CheckpointSchedule::single(999).unwrap(),
    )
    .unwrap();
    assert!((est[0].rho_lift[0] - c).abs() <= 1e-12);
}

#[test]
fn conjugated_circle_recovers_rho_from_any_start() {
    let n = 100_000;
    for theta0 in [0.05, 0.5, 0.93] {
        let angles = project_trace(&circle(theta0, n + 1), [0.0, 0.0]).unwrap();
        let lift = build_lift(&angles, UnwrapMode::ShortestArc).unwrap();
        let est = rotation_number(
            &lift,
            WeightSpec::Exponential,
            &CheckpointSchedule::single(n).unwrap(),
        )
        .unwrap();
        let r = est[0].rho.coords()[0];
        assert!(
            circle_distance(r, GOLDEN_MEAN) <= 1e-10,
            "theta0={theta0}: {r}"
        );
        assert_eq!(lift.ambiguous_steps(), 0);
    }
}

#[test]
fn off_center_projection_with_avoided_angle() {
    // seen from off center the steps straddle a half turn, so shortest arc is
    // unsafe; the avoided angle is taken from the empty part of the step range
    let n = 100_000;
    let angles = project_trace(&circle(0.0, n + 1), [0.2, -0.1]).unwrap();
    let short = build_lift(&angles, UnwrapMode::ShortestArc).unwrap();
    let flat = short.deltas_trace().unwrap();
    assert!(flat.as_flat().iter().any(|&d| d > 0.0) && flat.as_flat().iter().any(|&d| d < 0.0));
    let theta0 = auto_avoid_angle(&angles).unwrap();
    let lift = build_lift(&angles, UnwrapMode::AvoidAngle(theta0)).unwrap();
    let est = rotation_number(
        &lift,
        WeightSpec::Exponential,
        &CheckpointSchedule::single(n).unwrap(),
    )
    .unwrap();
    let r = est[0].rho.coords()[0];
    let best =
        circle_distance(r, GOLDEN_MEAN).min(circle_distance(est[0].complement()[0], GOLDEN_MEAN));
    assert!(best <= 1e-9, "{r}");
}

#[test]
fn winding_signs() {
    let angles = project_trace(&circle(0.0, 5000), [0.0, 0.0]).unwrap();
    // golden steps exceed a half turn, so shortest arc runs backwards
    assert_eq!(
        winding_check(&angles, 5000).unwrap().winding,
        Winding::Degree(-1)
    );
    let mut rev = angles.clone();
    rev.reverse();
    assert_eq!(
        winding_check(&rev, 5000).unwrap().winding,
        Winding::Degree(1)
    );

    let slow: Vec<_> = rotation_angles(0.01, 0.0, 5000);
    assert_eq!(
        winding_check(&slow, 5000).unwrap().winding,
        Winding::Degree(1)
    );

    let outside = project_trace(&circle(0.0, 5000), [3.0, 0.0]).unwrap();
    let rep = winding_check(&outside, 5000).unwrap();
    assert_eq!(rep.winding, Winding::Indeterminate, "{rep:?}");
}

#[test]
fn bad_inputs() {
    assert!(AngleVector::new(vec![1.0]).is_err());
    assert!(AngleVector::new(vec![]).is_err());
    assert!(build_lift(&[angle(0.1)], UnwrapMode::ShortestArc).is_err());
    assert!("sideways".parse::<UnwrapMode>().is_err());
}
