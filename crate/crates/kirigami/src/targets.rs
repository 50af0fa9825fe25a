//! Built-in target silhouettes (Heart, Circle, Hexagon) at any mask resolution.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::raster::SilhouetteMask;
use crate::sim::{framing, RasterConfig};

pub const NAMES: [&str; 3] = ["heart", "circle", "hexagon"];

pub fn outline(name: &str) -> Result<Vec<[f64; 2]>> {
    let pts = match name {
        "heart" => (0..256)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 256.0;
                let x = 16.0 * t.sin().powi(3);
                let y = 13.0 * t.cos() - 5.0 * (2.0 * t).cos() - 2.0 * (3.0 * t).cos() - (4.0 * t).cos();
                [x, y]
            })
            .collect(),
        "circle" => (0..256)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 256.0;
                [t.cos(), t.sin()]
            })
            .collect(),
        "hexagon" => (0..6)
            .map(|k| {
                let t = PI / 6.0 + PI / 3.0 * k as f64;
                [t.cos(), t.sin()]
            })
            .collect(),
        other => return Err(Error::Config(format!("unknown built-in target {other}"))),
    };
    Ok(pts)
}

/// Even-odd pixel-center fill of an arbitrary simple polygon, framed like simulated layouts.
pub fn render_polygon(poly: &[[f64; 2]], raster: &RasterConfig) -> SilhouetteMask {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut mask = SilhouetteMask::empty(raster.width, raster.height);
    mask.frame = framing(lo, hi, raster);
    let px: Vec<[f64; 2]> = poly.iter().map(|p| mask.frame.apply(*p)).collect();
    let n = px.len();
    for v in 0..raster.height {
        let y = v as f64 + 0.5;
        for u in 0..raster.width {
            let x = u as f64 + 0.5;
            let mut inside = false;
            for k in 0..n {
                let (a, b) = (px[k], px[(k + 1) % n]);
                if (a[1] > y) != (b[1] > y) {
                    let xc = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if x < xc {
                        inside = !inside;
                    }
                }
            }
            if inside {
                mask.set(u, v, true);
            }
        }
    }
    mask
}

pub fn builtin(name: &str, raster: &RasterConfig) -> Result<SilhouetteMask> {
    Ok(render_polygon(&outline(name)?, raster))
}
