use std::f64::consts::FRAC_PI_2;

use kirigami::geometry::*;
use kirigami::raster::{fill_convex, Frame, SilhouetteMask};
use kirigami::sim::{framing, rasterize_quad, simulate, RasterConfig};
use kirigami::Error;

fn layout(x: &RatioField, phi: f64, anchors: &BoundaryAnchors) -> Layout {
    march_decode(x, DeploymentParam::new(phi).unwrap(), anchors, &FeasibilityConfig::default()).unwrap()
}

fn unit_layout() -> Layout {
    let s = GridShape::new(1, 1).unwrap();
    layout(&RatioField::constant(s, 1.0), FRAC_PI_2, &BoundaryAnchors::default_for(s))
}

fn inside_convex(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let c = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if c != 0.0 {
            if sign != 0.0 && c.signum() != sign {
                return false;
            }
            sign = c.signum();
        }
    }
    true
}

#[test]
fn unit_square_is_centered_at_ninety_percent() {
    let m = simulate(&unit_layout(), &RasterConfig::default()).unwrap();
    assert_eq!((m.width, m.height), (128, 128));
    let side = 0.9 * 128.0;
    let (mut umin, mut umax, mut vmin, mut vmax) = (usize::MAX, 0, usize::MAX, 0);
    for v in 0..128 {
        for u in 0..128 {
            if m.get(u, v) {
                umin = umin.min(u);
                umax = umax.max(u);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
        }
    }
    let w = (umax - umin + 1) as f64;
    assert!((w - side).abs() <= 1.0, "width {w}");
    assert_eq!(umin + umax, 127);
    assert_eq!(vmin + vmax, 127);
    assert_eq!(m.count(), (umax - umin + 1) * (vmax - vmin + 1));
}

#[test]
fn simulate_is_deterministic() {
    let s = GridShape::default();
    let vals: Vec<f64> = (0..100).map(|k| 0.1 + (k as f64 * 0.731).fract() * 9.9).collect();
    let l = layout(&RatioField::new(s, vals).unwrap(), FRAC_PI_2, &BoundaryAnchors::default_for(s));
    let a = simulate(&l, &RasterConfig::default()).unwrap();
    let b = simulate(&l, &RasterConfig::default()).unwrap();
    assert_eq!(a.bits, b.bits);
}

// Union of the quads sampled at 1024x1024 and reduced by 8x8 majority vote.
#[test]
fn two_by_two_matches_supersampled_oracle() {
    let s = GridShape::new(2, 2).unwrap();
    let l = layout(&RatioField::constant(s, 1.0), FRAC_PI_2, &BoundaryAnchors::default_for(s));
    let m = simulate(&l, &RasterConfig::default()).unwrap();
    let quads: Vec<[Vec2; 4]> = l.iter_quads().map(|q| q.points().map(|p| m.frame.apply(p))).collect();
    let mut oracle = SilhouetteMask::empty(128, 128);
    for v in 0..128 {
        for u in 0..128 {
            let mut hits = 0;
            for sv in 0..8 {
                for su in 0..8 {
                    let p = [u as f64 + (su as f64 + 0.5) / 8.0, v as f64 + (sv as f64 + 0.5) / 8.0];
                    if quads.iter().any(|q| inside_convex(q, p)) {
                        hits += 1;
                    }
                }
            }
            oracle.set(u, v, hits > 32);
        }
    }
    assert!(m.iou(&oracle) >= 0.999, "iou {}", m.iou(&oracle));
}

#[test]
fn full_frame_quad_sets_every_pixel() {
    let mut m = SilhouetteMask::empty(16, 12);
    m.frame = Frame { sx: 1.0, sy: 1.0, cx: 0.0, cy: 0.0, u0: 0.0, v0: 0.0 };
    let q = VoidQuad { p0: [-1.0, 1.0], p1: [-1.0, -13.0], p2: [17.0, -13.0], p3: [17.0, 1.0] };
    rasterize_quad(&q, &mut m);
    assert_eq!(m.count(), 16 * 12);
}

#[test]
fn zero_area_quad_never_panics() {
    let mut m = SilhouetteMask::empty(32, 32);
    m.frame = framing([0.0, 0.0], [1.0, 1.0], &RasterConfig { width: 32, height: 32, fill: 0.9 });
    let q = VoidQuad { p0: [0.0, 0.0], p1: [1.0, 1.0], p2: [0.5, 0.5], p3: [0.0, 0.0] };
    rasterize_quad(&q, &mut m);
    let nan = VoidQuad { p0: [f64::NAN, 0.0], p1: [1.0, 1.0], p2: [0.5, 0.5], p3: [0.0, 0.0] };
    rasterize_quad(&nan, &mut m);
    assert!(m.count() <= 32);
}

#[test]
fn pixel_count_tracks_analytic_area() {
    let ppu = 40.0;
    for (k, q) in [
        VoidQuad { p0: [0.0, 0.0], p1: [1.0, 0.0], p2: [1.0, 1.0], p3: [0.0, 1.0] },
        VoidQuad { p0: [0.1, 0.2], p1: [1.2, 0.5], p2: [1.4, 1.4], p3: [0.3, 1.1] },
    ]
    .iter()
    .enumerate()
    {
        let mut m = SilhouetteMask::empty(80, 80);
        m.frame = Frame { sx: ppu, sy: ppu, cx: -0.3 - 0.01 * k as f64, cy: 1.6, u0: 0.0, v0: 0.0 };
        rasterize_quad(q, &mut m);
        let p = q.points();
        let perim: f64 = (0..4).map(|i| (p[(i + 1) % 4][0] - p[i][0]).hypot(p[(i + 1) % 4][1] - p[i][1])).sum();
        let expect = q.signed_area().abs() * ppu * ppu;
        assert!((m.count() as f64 - expect).abs() <= 2.0 * perim * ppu);
    }
}

#[test]
fn union_is_monotone() {
    let s = GridShape::new(3, 4).unwrap();
    let l = layout(&RatioField::new(s, (1..=12).map(|k| k as f64 * 0.5).collect()).unwrap(), FRAC_PI_2, &BoundaryAnchors::default_for(s));
    let mut m = SilhouetteMask::empty(128, 128);
    let (lo, hi) = l.bounds();
    m.frame = framing(lo, hi, &RasterConfig::default());
    let mut prev = m.clone();
    for q in l.iter_quads() {
        rasterize_quad(&q, &mut m);
        assert!(prev.bits.iter().zip(&m.bits).all(|(a, b)| *a <= *b));
        prev = m.clone();
    }
    assert_eq!(m.bits, simulate(&l, &RasterConfig::default()).unwrap().bits);
}

#[test]
fn translation_leaves_mask_unchanged() {
    let s = GridShape::new(4, 4).unwrap();
    let x = RatioField::new(s, (0..16).map(|k| 0.3 + k as f64 * 0.4).collect()).unwrap();
    let base = BoundaryAnchors::default_for(s);
    let shift = [0.25, -0.5];
    let moved = BoundaryAnchors {
        top: base.top.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect(),
        left: base.left.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect(),
        spacing: 1.0,
    };
    let a = simulate(&layout(&x, FRAC_PI_2, &base), &RasterConfig::default()).unwrap();
    let b = simulate(&layout(&x, FRAC_PI_2, &moved), &RasterConfig::default()).unwrap();
    assert_eq!(a.bits, b.bits);
}

#[test]
fn failed_decode_is_a_contract_violation() {
    let s = GridShape::new(1, 1).unwrap();
    let anchors = BoundaryAnchors { top: vec![[0.0, 0.0]], left: vec![[0.0, 0.0]], spacing: 1.0 };
    let l = layout(&RatioField::constant(s, 1.0), 1.0, &anchors);
    assert!(matches!(simulate(&l, &RasterConfig::default()), Err(Error::Contract(_))));
}

#[test]
fn shared_edges_are_claimed_once() {
    let a = [[1.5, 1.5], [9.5, 2.5], [7.0, 9.0], [2.0, 8.0]];
    let b = [[9.5, 2.5], [14.5, 3.0], [13.0, 10.0], [7.0, 9.0]];
    let (mut ca, mut cb) = (vec![0u8; 256], vec![0u8; 256]);
    fill_convex(&a, 16, 16, |k| ca[k] += 1);
    fill_convex(&b, 16, 16, |k| cb[k] += 1);
    assert!(ca.iter().zip(&cb).all(|(x, y)| x + y <= 1));
    // Axis-aligned halves of a square: ties on the shared edge go to exactly one side.
    let l = [[2.0, 2.0], [5.0, 2.0], [5.0, 6.0], [2.0, 6.0]].map(|p: [f64; 2]| [p[0] + 0.5, p[1] + 0.5]);
    let r = [[5.0, 2.0], [8.0, 2.0], [8.0, 6.0], [5.0, 6.0]].map(|p: [f64; 2]| [p[0] + 0.5, p[1] + 0.5]);
    let mut cover = vec![0u8; 100];
    fill_convex(&l, 10, 10, |k| cover[k] += 1);
    fill_convex(&r, 10, 10, |k| cover[k] += 1);
    assert!(cover.iter().all(|c| *c <= 1));
    assert_eq!(cover.iter().filter(|c| **c == 1).count(), 6 * 4);
}

#[test]
fn pgm_round_trip() {
    let s = GridShape::new(3, 3).unwrap();
    let l = layout(&RatioField::new(s, vec![1.0, 2.0, 0.5, 3.0, 0.2, 1.0, 4.0, 1.5, 0.7]).unwrap(), FRAC_PI_2, &BoundaryAnchors::default_for(s));
    let m = simulate(&l, &RasterConfig::default()).unwrap();
    let mut buf = Vec::new();
    m.write_pgm(&mut buf).unwrap();
    assert!(buf.starts_with(b"P5\n128 128\n255\n"));
    assert_eq!(buf.len(), 15 + 128 * 128);
    let back = SilhouetteMask::read_pgm(&buf[..]).unwrap();
    assert_eq!(back.bits, m.bits);
    assert!(SilhouetteMask::read_pgm(&b"P6\n2 2\n255\n...."[..]).is_err());
    assert!(SilhouetteMask::read_pgm(&b"P5\n4 4\n255\n12"[..]).is_err());
}

#[test]
fn components_and_fraction() {
    let mut m = SilhouetteMask::empty(8, 8);
    m.set(1, 1, true);
    m.set(2, 1, true);
    m.set(3, 2, true);
    assert_eq!(m.components4(), 2);
    m.set(3, 1, true);
    assert_eq!(m.components4(), 1);
    assert_eq!(m.fraction(), 4.0 / 64.0);
}

#[test]
fn shipped_target_assets_match_builtins() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    for name in kirigami::targets::NAMES {
        let stored = SilhouetteMask::load_pgm(&dir.join(format!("{name}.pgm"))).unwrap();
        let fresh = kirigami::targets::builtin(name, &RasterConfig::default()).unwrap();
        assert_eq!(stored.bits, fresh.bits, "{name}");
        assert_eq!(fresh.components4(), 1);
    }
}
