//! Forward simulator: deployed layout to binary silhouette.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Layout;
use crate::raster::{Frame, SilhouetteMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub width: usize,
    pub height: usize,
    /// Fraction of the smaller mask side covered by the larger layout extent.
    pub fill: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self { width: 128, height: 128, fill: 0.9 }
    }
}

/// Frame that centers the bounding box and scales its larger extent to `fill` of the mask.
pub fn framing(lo: [f64; 2], hi: [f64; 2], raster: &RasterConfig) -> Frame {
    let ext = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let side = raster.width.min(raster.height) as f64;
    let s = if ext > 0.0 { raster.fill * side / ext } else { 1.0 };
    Frame {
        sx: s,
        sy: s,
        cx: 0.5 * (lo[0] + hi[0]),
        cy: 0.5 * (lo[1] + hi[1]),
        u0: 0.5 * raster.width as f64,
        v0: 0.5 * raster.height as f64,
    }
}

pub fn simulate(layout: &Layout, raster: &RasterConfig) -> Result<SilhouetteMask> {
    if layout.feasibility.decode_failed {
        return Err(Error::Contract("simulate called on a failed decode".into()));
    }
    let (lo, hi) = layout.bounds();
    let mut mask = SilhouetteMask::empty(raster.width, raster.height);
    mask.frame = framing(lo, hi, raster);
    for q in layout.iter_quads() {
        mask.fill_polygon(&q.points());
    }
    Ok(mask)
}

/// Rasterize one quad into an existing mask through the mask's frame.
pub fn rasterize_quad(quad: &crate::geometry::VoidQuad, mask: &mut SilhouetteMask) {
    mask.fill_polygon(&quad.points());
}
