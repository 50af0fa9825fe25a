//! Similarity-aligned silhouette IoU, total variation, penalized reward.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_feasible, FeasibilityReport, RatioField};
use crate::raster::SilhouetteMask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Boundary pixels required in both masks to initialize from boundary points.
    pub min_boundary: usize,
    /// Apply the nearest-neighbor Procrustes refinement step.
    pub refine: bool,
    /// Eigenvalue ratio above which principal axes are treated as unreliable and a
    /// coarse rotation sweep is added to the candidates.
    pub isotropy: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { min_boundary: 16, refine: true, isotropy: 0.8 }
    }
}

/// q = s R(theta) p + t, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub s: f64,
    pub theta: f64,
    pub t: [f64; 2],
}

impl Similarity {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (sn, cs) = self.theta.sin_cos();
        [
            self.s * (cs * p[0] - sn * p[1]) + self.t[0],
            self.s * (sn * p[0] + cs * p[1]) + self.t[1],
        ]
    }

    fn mapping(s: f64, theta: f64, from: [f64; 2], to: [f64; 2]) -> Self {
        let (sn, cs) = theta.sin_cos();
        let r = [s * (cs * from[0] - sn * from[1]), s * (sn * from[0] + cs * from[1])];
        Self { s, theta, t: [to[0] - r[0], to[1] - r[1]] }
    }
}

/// Point statistics and lookup structures for one mask, reusable across many scores.
#[derive(Debug, Clone)]
pub struct PreparedMask {
    pub mask: SilhouetteMask,
    pub count: usize,
    pub bbox: [usize; 4],
    pub boundary: Vec<[f64; 2]>,
    stats_boundary: Stats,
    stats_fg: Stats,
    /// For every pixel, the index of a (near-)nearest boundary point. Only needed on
    /// the target side.
    nearest: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    centroid: [f64; 2],
    rms: f64,
    axis: f64,
    isotropy: f64,
}

fn stats(points: &[[f64; 2]]) -> Stats {
    let n = points.len().max(1) as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for p in points {
        mx += p[0];
        my += p[1];
    }
    mx /= n;
    my /= n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;
    let tr = sxx + syy;
    let disc = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    let (l1, l2) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    Stats {
        centroid: [mx, my],
        rms: tr.sqrt(),
        axis: 0.5 * (2.0 * sxy).atan2(sxx - syy),
        isotropy: if l1 > 0.0 { l2 / l1 } else { 1.0 },
    }
}

impl PreparedMask {
    /// Target-side preparation, including the nearest-boundary lookup.
    pub fn new(mask: &SilhouetteMask) -> Result<Self> {
        let mut p = Self::light(mask)?;
        p.nearest = Some(nearest_map(&p.boundary, mask.width, mask.height));
        Ok(p)
    }

    /// Prediction-side preparation.
    pub fn light(mask: &SilhouetteMask) -> Result<Self> {
        let (w, h) = (mask.width, mask.height);
        let mut fg = Vec::new();
        let mut boundary = Vec::new();
        let mut bbox = [usize::MAX, usize::MAX, 0, 0];
        for v in 0..h {
            for u in 0..w {
                if !mask.get(u, v) {
                    continue;
                }
                let p = [u as f64 + 0.5, v as f64 + 0.5];
                fg.push(p);
                bbox = [bbox[0].min(u), bbox[1].min(v), bbox[2].max(u), bbox[3].max(v)];
                let edge = u == 0
                    || v == 0
                    || u + 1 == w
                    || v + 1 == h
                    || !mask.get(u - 1, v)
                    || !mask.get(u + 1, v)
                    || !mask.get(u, v - 1)
                    || !mask.get(u, v + 1);
                if edge {
                    boundary.push(p);
                }
            }
        }
        if fg.is_empty() {
            return Err(Error::Metric("mask has no foreground pixels".into()));
        }
        Ok(Self {
            mask: mask.clone(),
            count: fg.len(),
            bbox,
            stats_boundary: stats(&boundary),
            stats_fg: stats(&fg),
            boundary,
            nearest: None,
        })
    }

    fn nearest_boundary(&self, p: [f64; 2]) -> [f64; 2] {
        let u = (p[0].floor().max(0.0) as usize).min(self.mask.width - 1);
        let v = (p[1].floor().max(0.0) as usize).min(self.mask.height - 1);
        match &self.nearest {
            Some(near) => self.boundary[near[v * self.mask.width + u] as usize],
            None => *self
                .boundary
                .iter()
                .min_by(|a, b| dist2(**a, p).total_cmp(&dist2(**b, p)))
                .expect("boundary is nonempty"),
        }
    }

    #[inline]
    fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = x - 0.5;
        let fy = y - 0.5;
        let (u0, v0) = (fx.floor(), fy.floor());
        let (ax, ay) = (fx - u0, fy - v0);
        let (w, h) = (self.mask.width as isize, self.mask.height as isize);
        let px = |u: isize, v: isize| -> f64 {
            if u < 0 || v < 0 || u >= w || v >= h {
                0.0
            } else {
                self.mask.bits[(v * w + u) as usize] as f64
            }
        };
        let (u0, v0) = (u0 as isize, v0 as isize);
        (1.0 - ay) * ((1.0 - ax) * px(u0, v0) + ax * px(u0 + 1, v0))
            + ay * ((1.0 - ax) * px(u0, v0 + 1) + ax * px(u0 + 1, v0 + 1))
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

// Multi-source BFS over the 8-neighborhood carrying the seed index.
fn nearest_map(seeds: &[[f64; 2]], w: usize, h: usize) -> Vec<u32> {
    let mut near = vec![u32::MAX; w * h];
    let mut queue = VecDeque::new();
    for (k, p) in seeds.iter().enumerate() {
        let idx = (p[1] as usize) * w + p[0] as usize;
        if near[idx] == u32::MAX {
            near[idx] = k as u32;
            queue.push_back(idx);
        }
    }
    if queue.is_empty() {
        return vec![0; w * h];
    }
    while let Some(idx) = queue.pop_front() {
        let (u, v) = ((idx % w) as isize, (idx / w) as isize);
        let seed = near[idx];
        for dv in -1..=1 {
            for du in -1..=1 {
                let (nu, nv) = (u + du, v + dv);
                if nu < 0 || nv < 0 || nu >= w as isize || nv >= h as isize {
                    continue;
                }
                let n = nv as usize * w + nu as usize;
                if near[n] == u32::MAX {
                    near[n] = seed;
                    queue.push_back(n);
                }
            }
        }
    }
    near
}

/// IoU between the target and the prediction pulled back through `tf` (bilinear, 0.5 cut).
pub fn aligned_iou(pred: &PreparedMask, target: &PreparedMask, tf: &Similarity) -> f64 {
    let (w, h) = (target.mask.width, target.mask.height);
    let b = pred.bbox;
    let corners = [
        [b[0] as f64 - 1.0, b[1] as f64 - 1.0],
        [b[2] as f64 + 2.0, b[1] as f64 - 1.0],
        [b[0] as f64 - 1.0, b[3] as f64 + 2.0],
        [b[2] as f64 + 2.0, b[3] as f64 + 2.0],
    ];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in corners {
        let q = tf.apply(c);
        for k in 0..2 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    let u_lo = lo[0].floor().max(0.0) as usize;
    let v_lo = lo[1].floor().max(0.0) as usize;
    let u_hi = (hi[0].ceil().max(0.0) as usize).min(w);
    let v_hi = (hi[1].ceil().max(0.0) as usize).min(h);

    let inv_s = 1.0 / tf.s;
    let (sn, cs) = tf.theta.sin_cos();
    let (mut inter, mut pcount) = (0usize, 0usize);
    for v in v_lo..v_hi {
        let qy = v as f64 + 0.5 - tf.t[1];
        let row = v * w;
        for u in u_lo..u_hi {
            let qx = u as f64 + 0.5 - tf.t[0];
            let px = inv_s * (cs * qx + sn * qy);
            let py = inv_s * (-sn * qx + cs * qy);
            if pred.sample(px, py) >= 0.5 {
                pcount += 1;
                inter += target.mask.bits[row + u] as usize;
            }
        }
    }
    let uni = pcount + target.count - inter;
    if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    }
}

/// One reflection-free similarity Procrustes solve mapping `src` onto `dst`.
pub fn procrustes(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Similarity {
    let n = src.len().max(1) as f64;
    let (mut ma, mut mb) = ([0.0; 2], [0.0; 2]);
    for (a, b) in src.iter().zip(dst) {
        for k in 0..2 {
            ma[k] += a[k] / n;
            mb[k] += b[k] / n;
        }
    }
    let (mut dot, mut crs, mut sa) = (0.0, 0.0, 0.0);
    for (a, b) in src.iter().zip(dst) {
        let (ax, ay) = (a[0] - ma[0], a[1] - ma[1]);
        let (bx, by) = (b[0] - mb[0], b[1] - mb[1]);
        dot += ax * bx + ay * by;
        crs += ax * by - ay * bx;
        sa += ax * ax + ay * ay;
    }
    let theta = crs.atan2(dot);
    let s = if sa > 0.0 { dot.hypot(crs) / sa } else { 1.0 };
    Similarity::mapping(s, theta, ma, mb)
}

/// Returns the aligned IoU and the transform used.
pub fn siou_prepared(pred: &PreparedMask, target: &PreparedMask, align: &AlignConfig) -> (f64, Similarity) {
    let boundary_path =
        pred.boundary.len() >= align.min_boundary && target.boundary.len() >= align.min_boundary;
    let (sp, st) = if boundary_path {
        (pred.stats_boundary, target.stats_boundary)
    } else {
        (pred.stats_fg, target.stats_fg)
    };
    let s = if sp.rms > 0.0 && st.rms > 0.0 {
        st.rms / sp.rms
    } else {
        (target.count as f64 / pred.count as f64).sqrt()
    };
    let theta0 = st.axis - sp.axis;
    let mut angles = vec![theta0, theta0 + PI];
    if sp.isotropy > align.isotropy || st.isotropy > align.isotropy {
        for k in 1..12 {
            if k != 6 {
                angles.push(theta0 + k as f64 * PI / 6.0);
            }
        }
    }
    let (cp, ct) = (pred.stats_fg.centroid, target.stats_fg.centroid);
    let mut best = (f64::NEG_INFINITY, Similarity::mapping(s, theta0, cp, ct));
    for th in angles {
        let tf = Similarity::mapping(s, th, cp, ct);
        let iou = aligned_iou(pred, target, &tf);
        if iou > best.0 {
            best = (iou, tf);
        }
    }
    if align.refine && !pred.boundary.is_empty() {
        let dst: Vec<[f64; 2]> =
            pred.boundary.iter().map(|p| target.nearest_boundary(best.1.apply(*p))).collect();
        let tf = procrustes(&pred.boundary, &dst);
        if tf.s.is_finite() && tf.s > 0.0 {
            let iou = aligned_iou(pred, target, &tf);
            if iou > best.0 {
                best = (iou, tf);
            }
        }
    }
    (best.0.clamp(0.0, 1.0), best.1)
}

pub fn siou(pred: &SilhouetteMask, target: &SilhouetteMask, align: &AlignConfig) -> Result<f64> {
    if !pred.same_size(target) {
        return Err(Error::Argument(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    if pred.bits == target.bits {
        if pred.count() == 0 {
            return Err(Error::Metric("mask has no foreground pixels".into()));
        }
        return Ok(1.0);
    }
    let p = PreparedMask::light(pred)?;
    let t = PreparedMask::new(target)?;
    Ok(siou_prepared(&p, &t, align).0)
}

pub fn total_variation(x: &RatioField) -> f64 {
    let (m, n) = (x.shape.m, x.shape.n);
    let mut tv = 0.0;
    for i in 0..m {
        for j in 0..n {
            if i + 1 < m {
                tv += (x.get(i + 1, j) - x.get(i, j)).abs();
            }
            if j + 1 < n {
                tv += (x.get(i, j + 1) - x.get(i, j)).abs();
            }
        }
    }
    tv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Accuracy,
    RegularityOnly,
    Hybrid,
}

impl std::str::FromStr for RewardMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Self::Accuracy),
            "regularity" | "regularity_only" => Ok(Self::RegularityOnly),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::Config(format!("unknown reward mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub tau_ov: f64,
    pub tau_siou: f64,
    pub pen_fail: f64,
    pub pen_invalid: f64,
    pub w_overlap: f64,
    pub lambda_tv: f64,
    pub tv_ref: f64,
    pub mode: RewardMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            tau_ov: 0.02,
            tau_siou: 0.85,
            pen_fail: 5.0,
            pen_invalid: 2.0,
            w_overlap: 2.0,
            lambda_tv: 0.0,
            tv_ref: 1.0,
            mode: RewardMode::Accuracy,
        }
    }
}

impl RewardConfig {
    pub fn with_mode(mode: RewardMode) -> Self {
        let lambda_tv = match mode {
            RewardMode::Accuracy | RewardMode::Hybrid => 0.0,
            RewardMode::RegularityOnly => 0.05,
        };
        Self { mode, lambda_tv, ..Self::default() }
    }
}

pub fn reward(x: &RatioField, feas: &FeasibilityReport, siou_val: Option<f64>, cfg: &RewardConfig) -> Result<f64> {
    if feas.decode_failed && siou_val.is_some() {
        return Err(Error::Contract("sIoU supplied for a failed decode".into()));
    }
    let tv = total_variation(x);
    let mut penalty = 0.0;
    if feas.decode_failed {
        penalty += cfg.pen_fail;
    } else {
        if feas.invalid_count > 0 {
            penalty += cfg.pen_invalid;
        }
        penalty += cfg.w_overlap * (feas.overlap_ratio - cfg.tau_ov).max(0.0);
    }
    let s = siou_val.unwrap_or(0.0);
    let r = match cfg.mode {
        RewardMode::Accuracy => s - penalty - cfg.lambda_tv * tv,
        RewardMode::RegularityOnly => -penalty - cfg.lambda_tv * tv,
        RewardMode::Hybrid => {
            let reg = if feas.decode_failed { 0.0 } else { (-tv / cfg.tv_ref).exp() };
            0.5 * s + 0.5 * reg - penalty
        }
    };
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub siou: f64,
    pub tv: f64,
    pub reward: f64,
    pub success: bool,
    pub feasibility: FeasibilityReport,
}

impl EvalResult {
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "siou": self.siou,
            "tv": self.tv,
            "reward": self.reward,
            "success": self.success,
            "n_inv": self.feasibility.invalid_count,
            "r_ov": self.feasibility.overlap_ratio,
            "decode_failed": self.feasibility.decode_failed,
        })
    }
}

pub fn is_success(result: &EvalResult, cfg: &RewardConfig) -> bool {
    result.siou >= cfg.tau_siou && check_feasible(&result.feasibility, cfg.tau_ov)
}

pub fn build_result(x: &RatioField, feas: FeasibilityReport, siou_val: Option<f64>, cfg: &RewardConfig) -> Result<EvalResult> {
    let r = reward(x, &feas, siou_val, cfg)?;
    let mut res = EvalResult { siou: siou_val.unwrap_or(0.0), tv: total_variation(x), reward: r, success: false, feasibility: feas };
    res.success = is_success(&res, cfg);
    Ok(res)
}
