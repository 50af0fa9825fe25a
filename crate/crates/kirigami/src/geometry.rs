//! Ratio-field parameterization, checkerboard angles and the marching decoder.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{fill_convex, Frame};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub m: usize,
    pub n: usize,
}

impl GridShape {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Argument(format!("grid shape {m}x{n} must be positive")));
        }
        Ok(Self { m, n })
    }

    pub fn square(k: usize) -> Self {
        Self { m: k, n: k }
    }

    pub fn cells(&self) -> usize {
        self.m * self.n
    }
}

impl Default for GridShape {
    fn default() -> Self {
        Self { m: 10, n: 10 }
    }
}

/// Row-major m x n matrix of side-length ratios a/b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioField {
    pub shape: GridShape,
    pub values: Vec<f64>,
}

impl RatioField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.cells() {
            return Err(Error::Argument(format!(
                "ratio field has {} entries, shape {}x{} needs {}",
                values.len(),
                shape.m,
                shape.n,
                shape.cells()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("ratio entries must be positive and finite, got {v}")));
        }
        Ok(Self { shape, values })
    }

    pub fn constant(shape: GridShape, v: f64) -> Self {
        Self { shape, values: vec![v; shape.cells()] }
    }

    /// 0-based access.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.shape.n + j]
    }

    pub fn in_box(&self, lo: f64, hi: f64) -> bool {
        self.values.iter().all(|v| *v >= lo && *v <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentParam {
    phi: f64,
}

impl DeploymentParam {
    pub fn new(phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < PI) {
            return Err(Error::Domain(format!("deployment angle {phi} outside (0, pi)")));
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAnchors {
    pub top: Vec<Vec2>,
    pub left: Vec<Vec2>,
    pub spacing: f64,
}

impl BoundaryAnchors {
    /// Top anchors at (j*d, 0) for j = 0..=n, left anchors at (0, -i*d) for i = 1..=m.
    pub fn regular(shape: GridShape, d: f64) -> Self {
        let top = (0..=shape.n).map(|j| [j as f64 * d, 0.0]).collect();
        let left = (1..=shape.m).map(|i| [0.0, -(i as f64) * d]).collect();
        Self { top, left, spacing: d }
    }

    pub fn default_for(shape: GridShape) -> Self {
        Self::regular(shape, 1.0)
    }

    fn check(&self, shape: GridShape) -> Result<()> {
        if self.top.is_empty() || self.left.len() < shape.m {
            return Err(Error::Argument(format!(
                "anchors ({} top, {} left) cannot seed a {}x{} grid",
                self.top.len(),
                self.left.len(),
                shape.m,
                shape.n
            )));
        }
        let finite = self.top.iter().chain(&self.left).all(|p| p[0].is_finite() && p[1].is_finite());
        if !finite || !(self.spacing > 0.0) {
            return Err(Error::Argument("anchors must be finite with positive spacing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoidQuad {
    pub p0: Vec2,
    pub p1: Vec2,
    pub p2: Vec2,
    pub p3: Vec2,
}

impl VoidQuad {
    pub fn points(&self) -> [Vec2; 4] {
        [self.p0, self.p1, self.p2, self.p3]
    }

    pub fn a(&self) -> f64 {
        norm(sub(self.p1, self.p0))
    }

    pub fn b(&self) -> f64 {
        norm(sub(self.p3, self.p0))
    }

    /// Shoelace area (signed, positive for counterclockwise order).
    pub fn signed_area(&self) -> f64 {
        let p = self.points();
        let mut s = 0.0;
        for k in 0..4 {
            let (a, b) = (p[k], p[(k + 1) % 4]);
            s += a[0] * b[1] - b[0] * a[1];
        }
        0.5 * s
    }

    /// Collapsed, too-short side, or turning direction changes along the boundary.
    pub fn is_invalid(&self, cfg: &FeasibilityConfig) -> bool {
        let p = self.points();
        if p.iter().any(|q| !q[0].is_finite() || !q[1].is_finite()) {
            return true;
        }
        if self.signed_area().abs() < cfg.min_area {
            return true;
        }
        let mut sign = 0.0f64;
        for k in 0..4 {
            let e0 = sub(p[(k + 1) % 4], p[k]);
            if norm(e0) < cfg.min_side {
                return true;
            }
            let e1 = sub(p[(k + 2) % 4], p[(k + 1) % 4]);
            let c = cross(e0, e1);
            if c != 0.0 {
                if sign != 0.0 && c.signum() != sign {
                    return true;
                }
                sign = c.signum();
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityConfig {
    pub eps_seed: f64,
    pub min_area: f64,
    pub min_side: f64,
    pub union_res: usize,
    pub union_pad: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self { eps_seed: 1e-9, min_area: 1e-8, min_side: 1e-8, union_res: 256, union_pad: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub invalid_count: usize,
    pub overlap_ratio: f64,
    pub decode_failed: bool,
    pub per_void_area: Vec<f64>,
    pub union_area: f64,
}

impl FeasibilityReport {
    pub fn failed(cells: usize) -> Self {
        Self {
            invalid_count: 0,
            overlap_ratio: 0.0,
            decode_failed: true,
            per_void_area: vec![0.0; cells],
            union_area: 0.0,
        }
    }
}

/// Decoded voids. Quads reference a shared vertex pool, so neighbors that share a
/// corner share the same stored coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub shape: GridShape,
    pub vertices: Vec<Vec2>,
    pub quads: Vec<[usize; 4]>,
    pub feasibility: FeasibilityReport,
}

impl Layout {
    /// Assemble a layout from explicit quads (no sharing); feasibility is recomputed.
    pub fn from_quads(shape: GridShape, quads: &[VoidQuad], cfg: &FeasibilityConfig) -> Self {
        let mut vertices = Vec::with_capacity(quads.len() * 4);
        let mut idx = Vec::with_capacity(quads.len());
        for q in quads {
            let base = vertices.len();
            vertices.extend_from_slice(&q.points());
            idx.push([base, base + 1, base + 2, base + 3]);
        }
        let mut layout = Layout {
            shape,
            vertices,
            quads: idx,
            feasibility: FeasibilityReport::failed(quads.len()),
        };
        layout.feasibility = assess(&layout, cfg);
        layout
    }

    pub fn quad(&self, k: usize) -> VoidQuad {
        let [a, b, c, d] = self.quads[k];
        VoidQuad { p0: self.vertices[a], p1: self.vertices[b], p2: self.vertices[c], p3: self.vertices[d] }
    }

    /// 0-based (row, column) access.
    pub fn quad_at(&self, i: usize, j: usize) -> VoidQuad {
        self.quad(i * self.shape.n + j)
    }

    pub fn iter_quads(&self) -> impl Iterator<Item = VoidQuad> + '_ {
        (0..self.quads.len()).map(|k| self.quad(k))
    }

    /// Axis-aligned bounds of the vertices referenced by quads: (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for q in &self.quads {
            for &v in q {
                let p = self.vertices[v];
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        (lo, hi)
    }

    /// Vertex indices referenced by two or more quads, in ascending order.
    pub fn shared_vertices(&self) -> Vec<usize> {
        let mut uses = vec![0usize; self.vertices.len()];
        for q in &self.quads {
            let mut seen: [usize; 4] = *q;
            seen.sort_unstable();
            for (k, &v) in seen.iter().enumerate() {
                if k == 0 || seen[k - 1] != v {
                    uses[v] += 1;
                }
            }
        }
        (0..uses.len()).filter(|&v| uses[v] >= 2).collect()
    }
}

pub fn rotate(theta: f64, v: Vec2) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// phi on cells with even (1-based) i+j, pi - phi on odd ones. Row-major.
pub fn checkerboard_angles(shape: GridShape, phi: f64) -> Result<Vec<f64>> {
    DeploymentParam::new(phi)?;
    let mut out = Vec::with_capacity(shape.cells());
    for i in 1..=shape.m {
        for j in 1..=shape.n {
            out.push(if (i + j) % 2 == 0 { phi } else { PI - phi });
        }
    }
    Ok(out)
}

/// Marching decoder. Row i starts from the left-boundary edge between anchors i-1 and i
/// (the first top anchor above row 1); every later cell reuses the right edge (p1, p2)
/// of its left neighbor as its seed edge (p0, p3).
pub fn march_decode(
    x: &RatioField,
    phi: DeploymentParam,
    anchors: &BoundaryAnchors,
    cfg: &FeasibilityConfig,
) -> Result<Layout> {
    let shape = x.shape;
    anchors.check(shape)?;
    let angles = checkerboard_angles(shape, phi.phi())?;

    let mut vertices: Vec<Vec2> = Vec::with_capacity(shape.m * (2 * shape.n + 2) + 1);
    vertices.push(anchors.top[0]);
    let left_ids: Vec<usize> = anchors
        .left
        .iter()
        .take(shape.m)
        .map(|p| {
            vertices.push(*p);
            vertices.len() - 1
        })
        .collect();

    let mut quads = Vec::with_capacity(shape.cells());
    let mut failed = false;
    for i in 0..shape.m {
        let mut i0 = left_ids[i];
        let mut i3 = if i == 0 { 0 } else { left_ids[i - 1] };
        for j in 0..shape.n {
            let (p0, p3) = (vertices[i0], vertices[i3]);
            let s = sub(p3, p0);
            if !(s[0].is_finite() && s[1].is_finite()) || norm(s) < cfg.eps_seed {
                failed = true;
                break;
            }
            let t = angles[i * shape.n + j];
            let u = scale(rotate(-t, s), x.get(i, j));
            let p1 = add(p0, u);
            let p2 = add(p3, u);
            if !(p1.iter().chain(&p2).all(|c| c.is_finite())) {
                failed = true;
                break;
            }
            vertices.push(p1);
            let i1 = vertices.len() - 1;
            vertices.push(p2);
            let i2 = vertices.len() - 1;
            quads.push([i0, i1, i2, i3]);
            i0 = i1;
            i3 = i2;
        }
        if failed {
            break;
        }
    }

    let mut layout = Layout { shape, vertices, quads, feasibility: FeasibilityReport::failed(shape.cells()) };
    if !failed {
        layout.feasibility = assess(&layout, cfg);
    }
    Ok(layout)
}

/// Invalid-void count and rasterized overlap ratio.
pub fn assess(layout: &Layout, cfg: &FeasibilityConfig) -> FeasibilityReport {
    let cells = layout.quads.len();
    if cells == 0 {
        return FeasibilityReport {
            invalid_count: 0,
            overlap_ratio: 0.0,
            decode_failed: false,
            per_void_area: vec![],
            union_area: 0.0,
        };
    }
    let mut invalid = 0;
    let mut areas = Vec::with_capacity(cells);
    for q in layout.iter_quads() {
        if q.is_invalid(cfg) {
            invalid += 1;
        }
        areas.push(q.signed_area().abs());
    }

    let (lo, hi) = layout.bounds();
    let ext = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let pad_x = cfg.union_pad * if hi[0] - lo[0] > 0.0 { hi[0] - lo[0] } else { ext };
    let pad_y = cfg.union_pad * if hi[1] - lo[1] > 0.0 { hi[1] - lo[1] } else { ext };
    let (w, h) = ((hi[0] - lo[0]) + 2.0 * pad_x, (hi[1] - lo[1]) + 2.0 * pad_y);
    let r = cfg.union_res;
    let (mut sum_px, mut union_px) = (0u64, 0u64);
    if w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite() {
        let frame = Frame {
            sx: r as f64 / w,
            sy: r as f64 / h,
            cx: lo[0] - pad_x,
            cy: hi[1] + pad_y,
            u0: 0.0,
            v0: 0.0,
        };
        let mut hit = vec![false; r * r];
        for q in layout.iter_quads() {
            let pts = q.points().map(|p| frame.apply(p));
            fill_convex(&pts, r, r, |k| {
                sum_px += 1;
                if !hit[k] {
                    hit[k] = true;
                    union_px += 1;
                }
            });
        }
        let px_area = (w / r as f64) * (h / r as f64);
        let overlap = if sum_px > 0 { 1.0 - union_px as f64 / sum_px as f64 } else { 0.0 };
        return FeasibilityReport {
            invalid_count: invalid,
            overlap_ratio: overlap.clamp(0.0, 1.0),
            decode_failed: false,
            per_void_area: areas,
            union_area: union_px as f64 * px_area,
        };
    }
    FeasibilityReport {
        invalid_count: invalid,
        overlap_ratio: 0.0,
        decode_failed: false,
        per_void_area: areas,
        union_area: 0.0,
    }
}

pub fn check_feasible(report: &FeasibilityReport, tau_ov: f64) -> bool {
    !report.decode_failed && report.invalid_count == 0 && report.overlap_ratio <= tau_ov
}

pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub(crate) fn scale(a: Vec2, k: f64) -> Vec2 {
    [a[0] * k, a[1] * k]
}

pub(crate) fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
