use approx::assert_abs_diff_eq;
use kirigami::geometry::{FeasibilityReport, GridShape, RatioField};
use kirigami::metrics::*;
use kirigami::raster::SilhouetteMask;
use kirigami::sim::RasterConfig;
use kirigami::targets::{outline, render_polygon};
use kirigami::Error;
use proptest::prelude::*;

fn heart(fill: f64) -> SilhouetteMask {
    render_polygon(&outline("heart").unwrap(), &RasterConfig { width: 128, height: 128, fill })
}

fn shifted(m: &SilhouetteMask, du: isize, dv: isize) -> SilhouetteMask {
    let mut out = SilhouetteMask::empty(m.width, m.height);
    for v in 0..m.height {
        for u in 0..m.width {
            if m.get(u, v) {
                let (nu, nv) = (u as isize + du, v as isize + dv);
                assert!(nu >= 0 && nv >= 0 && (nu as usize) < m.width && (nv as usize) < m.height);
                out.set(nu as usize, nv as usize, true);
            }
        }
    }
    out
}

fn feasible_report() -> FeasibilityReport {
    FeasibilityReport { invalid_count: 0, overlap_ratio: 0.01, decode_failed: false, per_void_area: vec![1.0], union_area: 1.0 }
}

#[test]
fn identical_masks_score_one() {
    let m = heart(0.6);
    assert_eq!(siou(&m, &m, &AlignConfig::default()).unwrap(), 1.0);
}

#[test]
fn translation_is_removed() {
    let m = heart(0.6);
    let t = shifted(&m, 7, -4);
    let s = siou(&t, &m, &AlignConfig::default()).unwrap();
    assert!((s - 1.0).abs() <= 0.01, "sIoU {s}");
}

#[test]
fn scale_is_removed() {
    let big = heart(0.6);
    let small = heart(0.48);
    let s = siou(&small, &big, &AlignConfig::default()).unwrap();
    assert!(s >= 0.98, "sIoU {s}");
}

#[test]
fn rotation_is_removed() {
    let pts = outline("heart").unwrap();
    let t = 1.1f64;
    let rot: Vec<[f64; 2]> = pts.iter().map(|p| [t.cos() * p[0] - t.sin() * p[1], t.sin() * p[0] + t.cos() * p[1]]).collect();
    let raster = RasterConfig { width: 128, height: 128, fill: 0.7 };
    let s = siou(&render_polygon(&rot, &raster), &render_polygon(&pts, &raster), &AlignConfig::default()).unwrap();
    assert!(s >= 0.97, "sIoU {s}");
}

#[test]
fn different_shapes_score_lower() {
    let raster = RasterConfig::default();
    let a = render_polygon(&outline("heart").unwrap(), &raster);
    let b = render_polygon(&[[0.0, 0.0], [10.0, 0.0], [10.0, 1.0], [0.0, 1.0]], &raster);
    assert!(siou(&b, &a, &AlignConfig::default()).unwrap() < 0.6);
}

#[test]
fn siou_errors() {
    let m = heart(0.6);
    let small = SilhouetteMask::empty(64, 64);
    assert!(matches!(siou(&small, &m, &AlignConfig::default()), Err(Error::Argument(_))));
    let empty = SilhouetteMask::empty(128, 128);
    assert!(matches!(siou(&empty, &m, &AlignConfig::default()), Err(Error::Metric(_))));
    assert!(matches!(siou(&empty, &empty, &AlignConfig::default()), Err(Error::Metric(_))));
}

#[test]
fn procrustes_recovers_a_similarity() {
    let src: Vec<[f64; 2]> = (0..20).map(|k| [(k as f64 * 0.7).sin() * 5.0, (k as f64 * 1.3).cos() * 3.0 + k as f64 * 0.1]).collect();
    let truth = Similarity { s: 1.7, theta: -0.6, t: [3.0, -8.0] };
    let dst: Vec<[f64; 2]> = src.iter().map(|p| truth.apply(*p)).collect();
    let est = procrustes(&src, &dst);
    assert_abs_diff_eq!(est.s, truth.s, epsilon = 1e-12);
    assert_abs_diff_eq!(est.theta, truth.theta, epsilon = 1e-12);
    assert_abs_diff_eq!(est.t[0], truth.t[0], epsilon = 1e-10);
    assert_abs_diff_eq!(est.t[1], truth.t[1], epsilon = 1e-10);
}

#[test]
fn tv_examples() {
    assert_eq!(total_variation(&RatioField::constant(GridShape::new(4, 5).unwrap(), 3.3)), 0.0);
    let x = RatioField::new(GridShape::new(2, 2).unwrap(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_abs_diff_eq!(total_variation(&x), 6.0, epsilon = 1e-15);
    assert_eq!(total_variation(&RatioField::new(GridShape::new(1, 1).unwrap(), vec![7.0]).unwrap()), 0.0);
}

fn field(v: Vec<f64>) -> RatioField {
    RatioField { shape: GridShape::new(3, 4).unwrap(), values: v }
}

proptest! {
    #[test]
    fn tv_is_a_seminorm(a in prop::collection::vec(0.1f64..10.0, 12), b in prop::collection::vec(0.1f64..10.0, 12), k in 0.1f64..5.0) {
        let (fa, fb) = (field(a.clone()), field(b.clone()));
        let sum = field(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        let scaled = field(a.iter().map(|x| k * x).collect());
        prop_assert!(total_variation(&fa) >= 0.0);
        prop_assert!((total_variation(&scaled) - k * total_variation(&fa)).abs() <= 1e-9 * (1.0 + total_variation(&scaled)));
        prop_assert!(total_variation(&sum) <= total_variation(&fa) + total_variation(&fb) + 1e-12);
        let constant = a.iter().all(|v| *v == a[0]);
        prop_assert_eq!(total_variation(&fa) == 0.0, constant);
    }

    #[test]
    fn reward_never_exceeds_siou(s in 0.0f64..=1.0, ov in 0.0f64..=1.0, inv in 0usize..3, lam in 0.0f64..1.0,
                                 vals in prop::collection::vec(0.1f64..10.0, 12)) {
        let x = field(vals);
        let feas = FeasibilityReport { invalid_count: inv, overlap_ratio: ov, decode_failed: false, per_void_area: vec![1.0; 12], union_area: 1.0 };
        for mode in [RewardMode::Accuracy, RewardMode::RegularityOnly, RewardMode::Hybrid] {
            let cfg = RewardConfig { lambda_tv: lam, mode, ..RewardConfig::default() };
            prop_assert!(reward(&x, &feas, Some(s), &cfg).unwrap() <= s.max(1.0) + 1e-12);
        }
        let cfg = RewardConfig { lambda_tv: lam, ..RewardConfig::default() };
        prop_assert!(reward(&x, &feas, Some(s), &cfg).unwrap() <= s + 1e-12);
    }
}

#[test]
fn reward_examples() {
    let x = RatioField::constant(GridShape::new(2, 2).unwrap(), 1.0);
    let cfg = RewardConfig::default();
    assert_eq!(reward(&x, &FeasibilityReport::failed(4), None, &cfg).unwrap(), -5.0);
    assert_abs_diff_eq!(reward(&x, &feasible_report(), Some(0.9), &cfg).unwrap(), 0.9, epsilon = 1e-15);
    let mut f = feasible_report();
    f.overlap_ratio = 0.05;
    assert_abs_diff_eq!(reward(&x, &f, Some(0.9), &cfg).unwrap(), 0.84, epsilon = 1e-12);
    f.overlap_ratio = 0.0;
    f.invalid_count = 2;
    assert_abs_diff_eq!(reward(&x, &f, Some(0.9), &cfg).unwrap(), -1.1, epsilon = 1e-12);
}

#[test]
fn reward_modes() {
    let x = RatioField::new(GridShape::new(2, 2).unwrap(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let reg = RewardConfig::with_mode(RewardMode::RegularityOnly);
    assert_abs_diff_eq!(reward(&x, &feasible_report(), Some(0.9), &reg).unwrap(), -reg.lambda_tv * 6.0, epsilon = 1e-12);
    let hyb = RewardConfig::with_mode(RewardMode::Hybrid);
    assert_abs_diff_eq!(reward(&x, &feasible_report(), Some(0.8), &hyb).unwrap(), 0.4 + 0.5 * (-6.0f64).exp(), epsilon = 1e-12);
    assert_eq!("regularity".parse::<RewardMode>().unwrap(), RewardMode::RegularityOnly);
    assert!("bogus".parse::<RewardMode>().is_err());
}

#[test]
fn siou_on_failed_decode_is_rejected() {
    let x = RatioField::constant(GridShape::new(2, 2).unwrap(), 1.0);
    let r = reward(&x, &FeasibilityReport::failed(4), Some(0.5), &RewardConfig::default());
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn success_examples() {
    let x = RatioField::constant(GridShape::new(2, 2).unwrap(), 1.0);
    let cfg = RewardConfig::default();
    assert!(build_result(&x, feasible_report(), Some(0.86), &cfg).unwrap().success);
    assert!(!build_result(&x, feasible_report(), Some(0.84), &cfg).unwrap().success);
    let mut f = feasible_report();
    f.overlap_ratio = 0.03;
    let r = build_result(&x, f, Some(0.99), &cfg).unwrap();
    assert!(!r.success);
    assert!(!is_success(&r, &cfg));
    assert_eq!(r.record()["r_ov"], 0.03);
}
