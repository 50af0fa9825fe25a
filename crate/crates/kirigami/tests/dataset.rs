use std::collections::HashSet;

use approx::assert_abs_diff_eq;
use kirigami::dataset::sobol::{Sobol, BLOCK};
use kirigami::dataset::*;
use kirigami::geometry::{check_feasible, GridShape};
use kirigami::raster::SilhouetteMask;
use kirigami::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference values from an independent unscrambled Sobol implementation (Joe-Kuo numbers).
fn point(dim: usize, index: u64) -> Vec<f64> {
    let mut s = Sobol::new(dim).unwrap();
    s.seek(index);
    s.next_unit()
}

fn pick(p: &[f64], dims: &[usize]) -> Vec<f64> {
    dims.iter().map(|&d| p[d]).collect()
}

#[test]
fn sobol_matches_reference_points() {
    assert!(point(1024, 0).iter().all(|v| *v == 0.0));
    assert!(point(1024, 1).iter().all(|v| *v == 0.5));
    let dims = [0, 1, 2, 49, 99];
    assert_eq!(pick(&point(100, 2), &dims), vec![0.75, 0.25, 0.25, 0.75, 0.75]);
    assert_eq!(pick(&point(100, 3), &dims), vec![0.25, 0.75, 0.75, 0.25, 0.25]);
    assert_eq!(pick(&point(100, 4), &dims), vec![0.375, 0.375, 0.625, 0.375, 0.875]);
    assert_eq!(pick(&point(100, 5), &dims), vec![0.875, 0.875, 0.125, 0.875, 0.375]);
    assert_eq!(&point(5, 31)[..], &[0.03125, 0.53125, 0.90625, 0.96875, 0.96875]);
    let far = [0, 7, 99, 500, 1023];
    assert_eq!(pick(&point(1024, 1000), &far), vec![0.2197265625, 0.8994140625, 0.1865234375, 0.7255859375, 0.7138671875]);
    assert_eq!(
        pick(&point(1024, 12345), &far),
        vec![0.64093017578125, 0.11334228515625, 0.53887939453125, 0.30255126953125, 0.57708740234375]
    );
    assert_eq!(
        pick(&point(1024, 16383), &far),
        vec![6.103515625e-05, 0.48858642578125, 0.29498291015625, 0.65045166015625, 0.42742919921875]
    );
}

#[test]
fn sequential_draws_match_seek() {
    let mut s = Sobol::new(37).unwrap();
    s.seek(500);
    for k in 500..700 {
        assert_eq!(s.index(), k);
        assert_eq!(s.next_unit(), point(37, k));
    }
}

#[test]
fn stream_first_point_and_determinism() {
    assert_eq!(sobol_stream(1, 1, 0).unwrap()[0], vec![0.0]);
    assert_eq!(sobol_stream(100, 50, 3).unwrap(), sobol_stream(100, 50, 3).unwrap());
    assert_ne!(sobol_stream(100, 5, 0).unwrap(), sobol_stream(100, 5, 1).unwrap());
    let pts = sobol_stream(100, 64, 0).unwrap();
    assert!(pts.iter().flatten().all(|v| (-1.0..1.0).contains(v)));
    assert_eq!(BLOCK, 1 << 22);
}

#[test]
fn dimension_limit() {
    assert!(matches!(Sobol::new(1025), Err(Error::Config(_))));
    assert!(matches!(sobol_stream(5000, 1, 0), Err(Error::Config(_))));
    assert!(Sobol::new(1024).is_ok());
}

fn star_discrepancy(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len() as f64;
    let mut worst = 0.0f64;
    for a in 1..=64 {
        for b in 1..=64 {
            let (x, y) = (a as f64 / 64.0, b as f64 / 64.0);
            let inside = pts.iter().filter(|p| p[0] < x && p[1] < y).count() as f64;
            worst = worst.max((inside / n - x * y).abs());
        }
    }
    worst
}

#[test]
fn sobol_beats_pseudo_random_discrepancy() {
    let mut s = Sobol::new(2).unwrap();
    let q: Vec<[f64; 2]> = (0..256).map(|_| { let p = s.next_unit(); [p[0], p[1]] }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r: Vec<[f64; 2]> = (0..256).map(|_| [rng.random(), rng.random()]).collect();
    assert!(star_discrepancy(&q) < star_discrepancy(&r));
}

#[test]
fn z_to_ratio_examples() {
    let s = GridShape::new(1, 4).unwrap();
    let x = z_to_ratio(s, &[0.0, 1.0, -1.0, 0.5]).unwrap();
    assert_eq!(x.values[0], 1.0);
    assert_eq!(x.values[1], 10.0);
    assert_abs_diff_eq!(x.values[2], 0.1, epsilon = 1e-15);
    assert_abs_diff_eq!(x.values[3], 10f64.sqrt(), epsilon = 1e-12);
    assert!(matches!(z_to_ratio(s, &[0.0, 1.5, 0.0, 0.0]), Err(Error::Domain(_))));
}

#[test]
fn empty_split() {
    let cfg = GenConfig::standard(0);
    let (samples, rec) = generate_split(0, Split::Test, &cfg).unwrap();
    assert!(samples.is_empty());
    assert_eq!(rec.count, 0);
    assert!(rec.ids.is_empty());
}

#[test]
fn retained_samples_pass_filters_again() {
    let cfg = GenConfig::standard(2);
    let (samples, rec) = generate_split(30, Split::Train, &cfg).unwrap();
    assert_eq!(samples.len(), 30);
    assert!(rec.acceptance_rate > 0.0 && rec.acceptance_rate <= 1.0);
    for s in &samples {
        let layout = cfg.problem.decode(&s.x).unwrap();
        assert!(check_feasible(&layout.feasibility, 0.02));
        assert!(topology_ok(&s.y, &cfg));
        assert_eq!(cfg.problem.render(&s.x).unwrap().unwrap().bits, s.y.bits);
        assert!(s.x.in_box(0.1, 10.0));
    }
}

#[test]
fn splits_use_disjoint_sobol_indices() {
    let cfg = GenConfig::standard(0);
    let mut seen = HashSet::new();
    for split in Split::ALL {
        let (_, rec) = generate_split(10, split, &cfg).unwrap();
        for i in rec.sobol_indices {
            assert!(seen.insert(i));
        }
    }
}

#[test]
fn stall_is_reported() {
    let mut cfg = GenConfig::standard(0);
    cfg.min_fraction = 0.99;
    cfg.stall_window = 50;
    assert!(matches!(generate_split(5, Split::Val, &cfg), Err(Error::Stall { .. })));
}

fn small_dataset(dir: &std::path::Path) -> SplitManifest {
    let cfg = GenConfig::standard(0);
    generate_dataset(dir, &[(Split::Train, 12), (Split::Val, 4), (Split::Test, 4)], &cfg).unwrap()
}

#[test]
fn fresh_dataset_verifies_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let loaded = SplitManifest::load(dir.path()).unwrap();
    assert_eq!(loaded, manifest);
    assert_eq!(manifest.config_hash, manifest.config.hash());
    let report = verify_dataset(dir.path(), &manifest, 128, 0).unwrap();
    assert!(report.min_iou.values().all(|v| *v == 1.0));
    assert_eq!(report.checked[&Split::Train], 12);
}

#[test]
fn regeneration_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    small_dataset(a.path());
    small_dataset(b.path());
    for split in ["train", "val", "test"] {
        let mut names: Vec<_> = std::fs::read_dir(a.path().join(split)).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for n in names {
            let fa = std::fs::read(a.path().join(split).join(&n)).unwrap();
            let fb = std::fs::read(b.path().join(split).join(&n)).unwrap();
            assert_eq!(fa, fb);
        }
    }
    assert_eq!(std::fs::read(a.path().join("manifest.json")).unwrap(), std::fs::read(b.path().join("manifest.json")).unwrap());
}

fn flip_pixels(path: &std::path::Path, count: usize) {
    let mut m = SilhouetteMask::load_pgm(path).unwrap();
    let mut flipped = 0;
    for k in 0..m.bits.len() {
        if flipped == count {
            break;
        }
        if m.bits[k] == 0 {
            m.bits[k] = 1;
            flipped += 1;
        }
    }
    m.save_pgm(path).unwrap();
}

#[test]
fn perturbed_masks_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let id = manifest.splits[&Split::Test].ids[0].clone();
    let pgm = dir.path().join("test").join(format!("{id}.pgm"));
    let fg = SilhouetteMask::load_pgm(&pgm).unwrap().count() as f64;

    flip_pixels(&pgm, 1);
    let r = verify_dataset(dir.path(), &manifest, 128, 0).unwrap();
    assert_abs_diff_eq!(r.min_iou[&Split::Test], fg / (fg + 1.0), epsilon = 1e-12);

    flip_pixels(&pgm, 9);
    assert!(fg / (fg + 10.0) < 0.999);
    match verify_dataset(dir.path(), &manifest, 128, 0) {
        Err(Error::Verification { ids, .. }) => assert_eq!(ids, vec![id.clone()]),
        other => panic!("expected verification failure, got {other:?}"),
    }

    let id2 = manifest.splits[&Split::Val].ids[1].clone();
    let xp = dir.path().join("val").join(format!("{id2}.x.txt"));
    let text = std::fs::read_to_string(&xp).unwrap();
    let first = text.split_whitespace().next().unwrap().to_string();
    std::fs::write(&xp, text.replacen(&first, "0", 1)).unwrap();
    match verify_dataset(dir.path(), &manifest, 128, 0) {
        Err(Error::Verification { ids, .. }) => assert!(ids.contains(&id2)),
        other => panic!("expected verification failure, got {other:?}"),
    }
}

#[test]
fn field_text_round_trip() {
    let cfg = GenConfig::standard(1);
    let (samples, _) = generate_split(3, Split::Val, &cfg).unwrap();
    for s in samples {
        let text = format_field(&s.x);
        assert_eq!(text.lines().count(), 10);
        assert_eq!(parse_field(&text).unwrap(), s.x);
    }
    assert!(matches!(parse_field("1 2\n3\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(parse_field("1 x\n"), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn split_names_parse() {
    for s in Split::ALL {
        assert_eq!(s.name().parse::<Split>().unwrap(), s);
    }
    assert!("holdout".parse::<Split>().is_err());
}
