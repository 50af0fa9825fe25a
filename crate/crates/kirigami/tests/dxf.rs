use std::f64::consts::FRAC_PI_2;

use kirigami::dataset::{generate_split, GenConfig, Split};
use kirigami::dxf::*;
use kirigami::geometry::{GridShape, Layout, RatioField, Vec2};
use kirigami::pipeline::Problem;
use kirigami::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layout(m: usize, n: usize, values: Vec<f64>) -> Layout {
    let problem = Problem::new(GridShape::new(m, n).unwrap(), FRAC_PI_2).unwrap();
    let l = problem.decode(&RatioField::new(problem.shape, values).unwrap()).unwrap();
    assert!(problem.feasible(&l));
    l
}

fn two_by_two() -> Layout {
    layout(2, 2, vec![1.5, 0.8, 2.0, 1.2])
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn polyline_samples(points: &[Vec2], closed: bool, count: usize) -> Vec<Vec2> {
    let mut segs: Vec<[Vec2; 2]> = points.windows(2).map(|w| [w[0], w[1]]).collect();
    if closed {
        segs.push([*points.last().unwrap(), points[0]]);
    }
    let total: f64 = segs.iter().map(|s| dist(s[0], s[1])).sum();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut d = total * (k as f64 + 0.5) / count as f64;
        for s in &segs {
            let l = dist(s[0], s[1]);
            if d <= l {
                let t = d / l;
                out.push([s[0][0] + t * (s[1][0] - s[0][0]), s[0][1] + t * (s[1][1] - s[0][1])]);
                break;
            }
            d -= l;
        }
    }
    out
}

fn nearest_connector(p: Vec2, plan: &CutPlan) -> f64 {
    plan.connectors.iter().map(|c| dist(p, c.center)).fold(f64::INFINITY, f64::min)
}

/// Soundness on retained paths, minimality on removed pieces, and no lost length.
fn check_trim(layout: &Layout, plan: &CutPlan) {
    let r = plan.connectors.first().map_or(0.0, |c| c.radius);
    let tol = 1e-9;
    for path in &plan.paths {
        for p in polyline_samples(&path.points, path.closed, 1000) {
            assert!(nearest_connector(p, plan) >= r - tol, "retained point {p:?} inside a connector");
        }
    }
    for seg in &plan.trimmed_segments {
        for p in polyline_samples(seg, false, 1000) {
            assert!(nearest_connector(p, plan) <= r + tol, "removed point {p:?} outside every connector");
        }
    }
    let len = |pts: &[Vec2], closed: bool| {
        let mut s: f64 = pts.windows(2).map(|w| dist(w[0], w[1])).sum();
        if closed {
            s += dist(*pts.last().unwrap(), pts[0]);
        }
        s
    };
    let kept: f64 = plan.paths.iter().map(|p| len(&p.points, p.closed)).sum();
    let cut: f64 = plan.trimmed_segments.iter().map(|s| dist(s[0], s[1])).sum();
    let outline: f64 = layout.iter_quads().map(|q| len(&q.points(), true)).sum();
    assert!((kept + cut - outline).abs() < 1e-9 * outline.max(1.0));
}

#[test]
fn zero_radius_keeps_outlines() {
    let l = two_by_two();
    let plan = plan_cuts(&l, &ConnectorConfig { radius: Some(0.0) }).unwrap();
    assert!(plan.connectors.is_empty() && plan.trimmed_segments.is_empty());
    assert_eq!(plan.paths.len(), 4);
    for (path, q) in plan.paths.iter().zip(l.iter_quads()) {
        assert!(path.closed);
        assert_eq!(path.points, q.points().to_vec());
    }
}

#[test]
fn single_cell_has_no_connectors() {
    let plan = plan_cuts(&layout(1, 1, vec![2.0]), &ConnectorConfig::default()).unwrap();
    assert!(plan.connectors.is_empty());
    assert_eq!(plan.paths.len(), 1);
    assert!(plan.paths[0].closed);
}

#[test]
fn two_by_two_connectors_and_trim() {
    let l = two_by_two();
    let shared = l.shared_vertices();
    assert!(!shared.is_empty());
    let plan = plan_cuts(&l, &ConnectorConfig::default()).unwrap();
    assert_eq!(plan.connectors.len(), shared.len());
    for v in shared {
        assert!(plan.connectors.iter().any(|c| c.center == l.vertices[v]));
    }
    assert!(!plan.trimmed_segments.is_empty());
    check_trim(&l, &plan);

    let big = plan_cuts(&l, &ConnectorConfig { radius: Some(0.2) }).unwrap();
    check_trim(&l, &big);
}

#[test]
fn default_radius_is_proportional() {
    let l = two_by_two();
    let shortest = l
        .iter_quads()
        .flat_map(|q| { let p = q.points(); (0..4).map(move |k| dist(p[k], p[(k + 1) % 4])) })
        .fold(f64::INFINITY, f64::min);
    let plan = plan_cuts(&l, &ConnectorConfig::default()).unwrap();
    assert!(plan.connectors.iter().all(|c| (c.radius - 0.02 * shortest).abs() < 1e-15));
}

#[test]
fn oversized_radius_is_rejected() {
    let l = two_by_two();
    assert!(matches!(plan_cuts(&l, &ConnectorConfig { radius: Some(100.0) }), Err(Error::Config(_))));
}

#[test]
fn empty_plan_round_trip() {
    let text = dxf_string(&CutPlan::default(), 1.0);
    assert!(text.contains("$INSUNITS\n70\n4\n"));
    assert_eq!(parse_dxf(&text).unwrap(), CutPlan::default());
}

#[test]
fn write_read_identity() {
    let l = two_by_two();
    let plan = plan_cuts(&l, &ConnectorConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.dxf");
    let scale = 12.5;
    write_dxf(&plan, scale, &path).unwrap();
    let back = read_dxf(&path).unwrap();
    assert_eq!(back.paths.len(), plan.paths.len());
    assert_eq!(back.connectors.len(), plan.connectors.len());
    for (a, b) in plan.paths.iter().zip(&back.paths) {
        assert_eq!(a.closed, b.closed);
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p[0] * scale - q[0]).abs() <= 1e-6 && (p[1] * scale - q[1]).abs() <= 1e-6);
        }
    }
    for (a, b) in plan.connectors.iter().zip(&back.connectors) {
        assert!(dist([a.center[0] * scale, a.center[1] * scale], b.center) <= 2e-6);
        assert!((a.radius * scale - b.radius).abs() <= 1e-6);
    }
}

#[test]
fn truncated_and_foreign_files() {
    let plan = plan_cuts(&two_by_two(), &ConnectorConfig::default()).unwrap();
    let text = dxf_string(&plan, 1.0);
    for cut in [text.len() / 3, text.len() / 2, text.len() - 5] {
        let mut end = cut;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        assert!(matches!(parse_dxf(&text[..end]), Err(Error::Parse { .. })), "cut at {cut}");
    }
    assert!(matches!(parse_dxf("0\nSECTION\n2\nENTITIES\nfoo\nbar\n"), Err(Error::Parse { line: 5, .. })));
    let foreign = "0\nSECTION\n2\nENTITIES\n0\nSPLINE\n8\n0\n0\nENDSEC\n0\nEOF\n";
    match parse_dxf(foreign) {
        Err(Error::UnsupportedEntity(name)) => assert_eq!(name, "SPLINE"),
        other => panic!("expected unsupported entity, got {other:?}"),
    }
}

#[test]
fn output_is_deterministic() {
    let a = dxf_string(&plan_cuts(&two_by_two(), &ConnectorConfig::default()).unwrap(), 3.0);
    let b = dxf_string(&plan_cuts(&two_by_two(), &ConnectorConfig::default()).unwrap(), 3.0);
    assert_eq!(a, b);
}

#[test]
fn ten_by_ten_entity_counts() {
    let cfg = GenConfig::standard(0);
    let (samples, _) = generate_split(1, Split::Test, &cfg).unwrap();
    let l = cfg.problem.decode(&samples[0].x).unwrap();
    let plan = plan_cuts(&l, &ConnectorConfig::default()).unwrap();
    check_trim(&l, &plan);
    let text = dxf_string(&plan, 1.0);
    let lines: Vec<&str> = text.lines().collect();
    let mut polylines = 0;
    let mut circles = 0;
    for k in (0..lines.len()).step_by(2) {
        if lines[k] == "0" {
            match lines[k + 1] {
                "POLYLINE" => polylines += 1,
                "CIRCLE" => circles += 1,
                _ => {}
            }
        }
        if lines[k] == "8" {
            assert!(lines[k + 1] == CUT_LAYER || lines[k + 1] == CONNECTOR_LAYER);
        }
    }
    assert_eq!(polylines, plan.paths.len());
    assert_eq!(circles, l.shared_vertices().len());
    // A trimmed loop breaks into at most as many open pieces as it has removed intervals.
    let open = plan.paths.iter().filter(|p| !p.closed).count();
    let closed = plan.paths.len() - open;
    assert!(open <= plan.trimmed_segments.len());
    assert!(closed + open.min(1) <= 100 && polylines >= 100);
}

#[test]
fn random_small_layouts_trim_correctly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 10 {
        let values: Vec<f64> = (0..9).map(|_| rng.random_range(0.5..2.0)).collect();
        let problem = Problem::new(GridShape::new(3, 3).unwrap(), FRAC_PI_2).unwrap();
        let l = problem.decode(&RatioField::new(problem.shape, values).unwrap()).unwrap();
        if !problem.feasible(&l) {
            continue;
        }
        check_trim(&l, &plan_cuts(&l, &ConnectorConfig::default()).unwrap());
        checked += 1;
    }
}
