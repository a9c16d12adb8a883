use lmpcc::track::{
    contouring_lag_errors, dlc_scenario, edge_error, obstacle_error, straight_scenario, Obstacle, PathSpline,
    RoadEdges, Scenario,
};
use proptest::prelude::*;

fn circle(radius: f64, n: usize) -> PathSpline {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / (n - 1) as f64;
            (radius * t.sin(), radius * (1.0 - t.cos()))
        })
        .collect();
    PathSpline::build(&pts).unwrap()
}

#[test]
fn circle_curvature_is_inverse_radius() {
    let spline = circle(50.0, 60);
    let l = spline.length();
    assert!((l - std::f64::consts::PI * 50.0).abs() < 1e-2, "length {l}");
    // natural end conditions pull curvature to zero at the ends
    for i in 0..=100 {
        let s = 0.2 * l + 0.6 * l * i as f64 / 100.0;
        let k = spline.evaluate(s).curvature;
        assert!((k - 1.0 / 50.0).abs() < 1e-3, "s = {s}: curvature {k}");
    }
}

#[test]
fn arc_length_parametrization_has_unit_speed() {
    for sc in [dlc_scenario(60.0, false).unwrap(), dlc_scenario(60.0, true).unwrap()] {
        let l = sc.spline.length();
        let h = 1e-4;
        for i in 0..1000 {
            let s = h + (l - 2.0 * h) * i as f64 / 999.0;
            let (a, b) = (sc.spline.evaluate(s - h), sc.spline.evaluate(s + h));
            let speed = (b.x - a.x).hypot(b.y - a.y) / (2.0 * h);
            assert!((speed - 1.0).abs() < 1e-3, "{} at s = {s}: |dP/ds| = {speed}", sc.name);
        }
    }
}

#[test]
fn projection_recovers_arc_length() {
    let sc = dlc_scenario(55.0, true).unwrap();
    for i in 1..200 {
        let s = sc.finish_s * i as f64 / 200.0;
        let p = sc.spline.evaluate(s);
        let (sh, ch) = p.heading.sin_cos();
        let (x, y) = (p.x - 0.5 * sh, p.y + 0.5 * ch);
        let found = sc.spline.project(x, y, s + 1.0);
        assert!((found - s).abs() < 1e-6, "{found} vs {s}");
        let (con, lag) = contouring_lag_errors(x, y, found, &sc.spline);
        assert!((con - 0.5).abs() < 1e-6 && lag.abs() < 1e-6);
    }
}

#[test]
fn dlc_scenarios_are_consistent() {
    for (speed, prio) in [(55.0, false), (60.0, false), (55.0, true), (60.0, true), (75.0, true)] {
        let sc = dlc_scenario(speed, prio).unwrap();
        sc.validate().unwrap();
        assert!((sc.v_ref - speed / 3.6).abs() < 1e-12);
        assert_eq!(sc.collision_prioritization, prio);
        assert!(sc.finish_s < sc.spline.length());
        let back = Scenario::from_toml_str(&sc.to_toml_string()).unwrap();
        assert_eq!(back.name, sc.name);
        assert_eq!(back.obstacles, sc.obstacles);
        assert!((back.spline.length() - sc.spline.length()).abs() < 1e-9);
    }
    let st = straight_scenario(60.0, 200.0).unwrap();
    assert!(st.obstacles.is_empty());
    assert!(st.spline.evaluate(100.0).curvature.abs() < 1e-12);
}

#[test]
fn path_queries_outside_range_are_clamped() {
    let sc = straight_scenario(50.0, 100.0).unwrap();
    let p = sc.spline.evaluate(-5.0);
    assert!(p.clamped);
    assert_eq!((p.x, p.y), (sc.spline.evaluate(0.0).x, sc.spline.evaluate(0.0).y));
    assert!(sc.spline.evaluate(sc.spline.length() + 1.0).clamped);
    assert!(!sc.spline.evaluate(10.0).clamped);
}

#[test]
fn too_few_waypoints_are_rejected() {
    assert!(PathSpline::build(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
    assert!(PathSpline::build(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
}

fn rotate(p: (f64, f64), th: f64, t: (f64, f64)) -> (f64, f64) {
    let (s, c) = th.sin_cos();
    (c * p.0 - s * p.1 + t.0, s * p.0 + c * p.1 + t.1)
}

proptest! {
    #[test]
    fn errors_are_invariant_under_rigid_motion(
        th in -3.1f64..3.1,
        tx in -100.0f64..100.0,
        ty in -100.0f64..100.0,
        s in 1.0f64..80.0,
        px in -5.0f64..5.0,
        py in -5.0f64..5.0,
    ) {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| { let x = 8.0 * i as f64; (x, 3.0 * (0.1 * x).sin()) }).collect();
        let moved: Vec<(f64, f64)> = pts.iter().map(|&p| rotate(p, th, (tx, ty))).collect();
        let a = PathSpline::build(&pts).unwrap();
        let b = PathSpline::build(&moved).unwrap();
        prop_assert!((a.length() - b.length()).abs() < 1e-9);
        let pa = a.evaluate(s);
        let query = (pa.x + px, pa.y + py);
        let qb = rotate(query, th, (tx, ty));
        let ea = contouring_lag_errors(query.0, query.1, s, &a);
        let eb = contouring_lag_errors(qb.0, qb.1, s, &b);
        prop_assert!((ea.0 - eb.0).abs() < 1e-8 && (ea.1 - eb.1).abs() < 1e-8);
        prop_assert!((a.evaluate(s).curvature - b.evaluate(s).curvature).abs() < 1e-8);

        let o = Obstacle { x: pa.x + 1.0, y: pa.y, a: 2.0, b: 1.0, heading: 0.3, margin: 0.5 };
        let (ox, oy) = rotate((o.x, o.y), th, (tx, ty));
        let ob = Obstacle { x: ox, y: oy, heading: o.heading + th, ..o };
        prop_assert!((obstacle_error(query.0, query.1, &o) - obstacle_error(qb.0, qb.1, &ob)).abs() < 1e-9);
    }

    #[test]
    fn hinge_errors_are_non_negative(
        x in -50.0f64..150.0,
        y in -20.0f64..20.0,
        s in 0.0f64..100.0,
        left in 0.5f64..5.0,
        right in -5.0f64..-0.5,
        hw in 0.0f64..1.0,
    ) {
        let sc = straight_scenario(50.0, 120.0).unwrap();
        let edges = RoadEdges::constant(left, right).unwrap();
        let e = edge_error(x, y, s, &edges, &sc.spline, hw);
        prop_assert!(e >= 0.0);
        let (con, _) = contouring_lag_errors(x, y, s, &sc.spline);
        if con < left - hw && con > right + hw {
            prop_assert_eq!(e, 0.0);
        }
        let o = Obstacle { x: 50.0, y: 0.0, a: 3.0, b: 1.5, heading: 0.0, margin: 0.2 };
        let oe = obstacle_error(x, y, &o);
        prop_assert!((0.0..=1.0).contains(&oe));
        prop_assert_eq!(oe > 0.0, o.normalized_distance(x, y, o.margin) < 1.0);
    }
}
