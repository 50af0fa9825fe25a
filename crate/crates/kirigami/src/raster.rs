//! Binary masks, convex polygon fill and PGM I/O.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Model-to-pixel map: u = u0 + sx (x - cx), v = v0 - sy (y - cy). Pixel v grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub sx: f64,
    pub sy: f64,
    pub cx: f64,
    pub cy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Frame {
    pub fn identity() -> Self {
        Self { sx: 1.0, sy: -1.0, cx: 0.0, cy: 0.0, u0: 0.0, v0: 0.0 }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        [self.u0 + self.sx * (p[0] - self.cx), self.v0 - self.sy * (p[1] - self.cy)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteMask {
    pub width: usize,
    pub height: usize,
    /// Row-major, one byte per pixel, 0 or 1.
    pub bits: Vec<u8>,
    pub frame: Frame,
}

impl SilhouetteMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![0; width * height], frame: Frame::identity() }
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u] != 0
    }

    pub fn set(&mut self, u: usize, v: usize, on: bool) {
        self.bits[v * self.width + u] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b != 0).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / (self.width * self.height) as f64
    }

    pub fn same_size(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Plain IoU of two equally sized masks (1.0 when both are empty).
    pub fn iou(&self, other: &Self) -> f64 {
        let (mut inter, mut uni) = (0usize, 0usize);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            let (a, b) = (*a != 0, *b != 0);
            inter += (a && b) as usize;
            uni += (a || b) as usize;
        }
        if uni == 0 {
            1.0
        } else {
            inter as f64 / uni as f64
        }
    }

    /// Fill a convex polygon given in model coordinates through this mask's frame.
    pub fn fill_polygon(&mut self, poly: &[Vec2]) {
        let pts: Vec<Vec2> = poly.iter().map(|p| self.frame.apply(*p)).collect();
        let (w, h) = (self.width, self.height);
        let bits = &mut self.bits;
        fill_convex(&pts, w, h, |k| bits[k] = 1);
    }

    /// Number of 4-connected foreground components.
    pub fn components4(&self) -> usize {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..w * h {
            if self.bits[start] == 0 || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (u, v) = (k % w, k / w);
                let mut visit = |nk: usize| {
                    if self.bits[nk] != 0 && !seen[nk] {
                        seen[nk] = true;
                        stack.push(nk);
                    }
                };
                if u > 0 {
                    visit(k - 1);
                }
                if u + 1 < w {
                    visit(k + 1);
                }
                if v > 0 {
                    visit(k - w);
                }
                if v + 1 < h {
                    visit(k + w);
                }
            }
        }
        count
    }

    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let data: Vec<u8> = self.bits.iter().map(|b| if *b != 0 { 255 } else { 0 }).collect();
        out.write_all(&data)?;
        Ok(())
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.bits.len() + 20);
        self.write_pgm(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Reads binary PGM; pixels >= 128 are foreground.
    pub fn read_pgm<R: Read>(mut input: R) -> Result<Self> {
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        let mut pos = 0;
        let mut fields = Vec::new();
        while fields.len() < 4 {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Parse { line: 1, msg: "truncated PGM header".into() });
            }
            fields.push(String::from_utf8_lossy(&data[start..pos]).to_string());
        }
        pos += 1;
        if fields[0] != "P5" {
            return Err(Error::Parse { line: 1, msg: format!("bad PGM magic {}", fields[0]) });
        }
        let num = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse { line: 1, msg: format!("bad PGM field {s}") })
        };
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(Error::Parse { line: 1, msg: format!("unsupported maxval {maxval}") });
        }
        if data.len() < pos + w * h {
            return Err(Error::Parse { line: 1, msg: "truncated PGM raster".into() });
        }
        let bits = data[pos..pos + w * h].iter().map(|b| (*b >= 128) as u8).collect();
        Ok(Self { width: w, height: h, bits, frame: Frame::identity() })
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        Self::read_pgm(std::fs::File::open(path)?)
    }
}

// Edge function evaluated from a canonical endpoint order, so the two polygons sharing
// an edge get exactly opposite values.
#[inline]
fn edge_fn(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    if (a[0], a[1]) <= (b[0], b[1]) {
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    } else {
        -((a[0] - b[0]) * (p[1] - b[1]) - (a[1] - b[1]) * (p[0] - b[0]))
    }
}

/// Calls `f(v * w + u)` for every pixel whose center lies inside the convex polygon
/// (pixel coordinates). Points exactly on an edge belong to the polygon only when the
/// edge is a top or left edge, so polygons sharing an edge never both claim a pixel.
pub fn fill_convex<F: FnMut(usize)>(pts: &[Vec2], w: usize, h: usize, mut f: F) {
    let n = pts.len();
    if n < 3 || pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return;
    }
    let mut area2 = 0.0;
    for k in 0..n {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        area2 += a[0] * b[1] - b[0] * a[1];
    }
    if area2 == 0.0 {
        return;
    }
    let mut edges: Vec<(Vec2, Vec2, bool)> = Vec::with_capacity(n);
    for k in 0..n {
        let (mut a, mut b) = (pts[k], pts[(k + 1) % n]);
        if area2 < 0.0 {
            std::mem::swap(&mut a, &mut b);
        }
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        let owns = dy < 0.0 || (dy == 0.0 && dx > 0.0);
        edges.push((a, b, owns));
    }
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        umin = umin.min(p[0]);
        umax = umax.max(p[0]);
        vmin = vmin.min(p[1]);
        vmax = vmax.max(p[1]);
    }
    let u_lo = (umin - 0.5).ceil().max(0.0);
    let u_hi = (umax - 0.5).floor().min(w as f64 - 1.0);
    let v_lo = (vmin - 0.5).ceil().max(0.0);
    let v_hi = (vmax - 0.5).floor().min(h as f64 - 1.0);
    if u_lo > u_hi || v_lo > v_hi {
        return;
    }
    let (u_lo, u_hi, v_lo, v_hi) = (u_lo as usize, u_hi as usize, v_lo as usize, v_hi as usize);
    for v in v_lo..=v_hi {
        let py = v as f64 + 0.5;
        for u in u_lo..=u_hi {
            let p = [u as f64 + 0.5, py];
            let inside = edges.iter().all(|&(a, b, owns)| {
                let e = edge_fn(a, b, p);
                e > 0.0 || (e == 0.0 && owns)
            });
            if inside {
                f(v * w + u);
            }
        }
    }
}
