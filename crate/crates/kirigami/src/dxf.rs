//! Cut planning with connector markers and a minimal R12 ASCII DXF writer/reader.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Layout, Vec2};

pub const CUT_LAYER: &str = "CUT";
pub const CONNECTOR_LAYER: &str = "CONNECTOR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connector {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CutPlan {
    pub paths: Vec<Polyline>,
    pub connectors: Vec<Connector>,
    pub trimmed_segments: Vec<[Vec2; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConnectorConfig {
    /// Connector radius in model units; `None` means 2% of the shortest void edge.
    pub radius: Option<f64>,
}

fn lerp(a: Vec2, b: Vec2, t: f64) -> Vec2 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Parameter intervals of segment a->b lying strictly inside any connector disk, merged.
fn removed_intervals(a: Vec2, b: Vec2, connectors: &[Connector]) -> Vec<(f64, f64)> {
    let d = sub(b, a);
    let dd = d[0] * d[0] + d[1] * d[1];
    let mut iv = Vec::new();
    if dd == 0.0 {
        return iv;
    }
    for c in connectors {
        let f = sub(a, c.center);
        let bq = f[0] * d[0] + f[1] * d[1];
        let cq = f[0] * f[0] + f[1] * f[1] - c.radius * c.radius;
        let disc = bq * bq - dd * cq;
        if disc <= 0.0 {
            continue;
        }
        let s = disc.sqrt();
        let (t1, t2) = (((-bq - s) / dd).max(0.0), ((-bq + s) / dd).min(1.0));
        if t2 > t1 {
            iv.push((t1, t2));
        }
    }
    iv.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in iv {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// One closed outline per void; connectors at shared vertices; cut paths trimmed inside
/// connector disks.
pub fn plan_cuts(layout: &Layout, cfg: &ConnectorConfig) -> Result<CutPlan> {
    let mut shortest = f64::INFINITY;
    for q in layout.iter_quads() {
        let p = q.points();
        for k in 0..4 {
            shortest = shortest.min(norm(sub(p[(k + 1) % 4], p[k])));
        }
    }
    let r = cfg.radius.unwrap_or(0.02 * shortest);
    if !(r >= 0.0) || (shortest.is_finite() && r > 0.5 * shortest) {
        return Err(Error::Config(format!(
            "connector radius {r} exceeds half the shortest void edge ({shortest})"
        )));
    }

    let mut connectors: Vec<Connector> = if r > 0.0 {
        layout.shared_vertices().into_iter().map(|v| Connector { center: layout.vertices[v], radius: r }).collect()
    } else {
        Vec::new()
    };
    connectors.sort_by(|a, b| {
        a.center[0].total_cmp(&b.center[0]).then(a.center[1].total_cmp(&b.center[1]))
    });

    let mut plan = CutPlan { connectors: connectors.clone(), ..Default::default() };
    for q in layout.iter_quads() {
        let p = q.points();
        // Kept pieces along the loop, as (edge, t_start, t_end).
        let mut pieces: Vec<(usize, f64, f64)> = Vec::new();
        let mut trimmed = false;
        for k in 0..4 {
            let (a, b) = (p[k], p[(k + 1) % 4]);
            let removed = removed_intervals(a, b, &connectors);
            let mut t = 0.0;
            for (s, e) in removed {
                trimmed = true;
                plan.trimmed_segments.push([lerp(a, b, s), lerp(a, b, e)]);
                if s > t {
                    pieces.push((k, t, s));
                }
                t = e;
            }
            if t < 1.0 {
                pieces.push((k, t, 1.0));
            }
        }
        if !trimmed {
            plan.paths.push(Polyline { points: p.to_vec(), closed: true });
            continue;
        }
        let mut lines: Vec<Vec<Vec2>> = Vec::new();
        let mut open_end: Option<usize> = None;
        for &(k, s, e) in &pieces {
            let (a, b) = (p[k], p[(k + 1) % 4]);
            let continues = s == 0.0 && open_end.is_some_and(|prev| (prev + 1) % 4 == k);
            if continues {
                lines.last_mut().expect("open line").push(lerp(a, b, e));
            } else {
                lines.push(vec![lerp(a, b, s), lerp(a, b, e)]);
            }
            open_end = if e == 1.0 { Some(k) } else { None };
        }
        let first_starts_loop = pieces.first().is_some_and(|f| f.0 == 0 && f.1 == 0.0);
        if lines.len() > 1 && open_end == Some(3) && first_starts_loop {
            let mut last = lines.pop().expect("two lines");
            last.extend(lines[0].iter().skip(1).cloned());
            lines[0] = last;
        }
        plan.paths.extend(lines.into_iter().map(|points| Polyline { points, closed: false }));
    }
    Ok(plan)
}

fn pair(out: &mut String, code: i32, value: &str) {
    let _ = write!(out, "{code}\n{value}\n");
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// ASCII DXF text for the plan, coordinates multiplied by `scale_mm`.
pub fn dxf_string(plan: &CutPlan, scale_mm: f64) -> String {
    let mut o = String::new();
    pair(&mut o, 0, "SECTION");
    pair(&mut o, 2, "HEADER");
    pair(&mut o, 9, "$ACADVER");
    pair(&mut o, 1, "AC1009");
    pair(&mut o, 9, "$INSUNITS");
    pair(&mut o, 70, "4");
    pair(&mut o, 0, "ENDSEC");
    pair(&mut o, 0, "SECTION");
    pair(&mut o, 2, "TABLES");
    pair(&mut o, 0, "TABLE");
    pair(&mut o, 2, "LAYER");
    pair(&mut o, 70, "2");
    for (name, color) in [(CUT_LAYER, "7"), (CONNECTOR_LAYER, "1")] {
        pair(&mut o, 0, "LAYER");
        pair(&mut o, 2, name);
        pair(&mut o, 70, "0");
        pair(&mut o, 62, color);
        pair(&mut o, 6, "CONTINUOUS");
    }
    pair(&mut o, 0, "ENDTAB");
    pair(&mut o, 0, "ENDSEC");
    pair(&mut o, 0, "SECTION");
    pair(&mut o, 2, "ENTITIES");
    for path in &plan.paths {
        pair(&mut o, 0, "POLYLINE");
        pair(&mut o, 8, CUT_LAYER);
        pair(&mut o, 66, "1");
        pair(&mut o, 70, if path.closed { "1" } else { "0" });
        pair(&mut o, 10, "0.0");
        pair(&mut o, 20, "0.0");
        pair(&mut o, 30, "0.0");
        for p in &path.points {
            pair(&mut o, 0, "VERTEX");
            pair(&mut o, 8, CUT_LAYER);
            pair(&mut o, 10, &num(p[0] * scale_mm));
            pair(&mut o, 20, &num(p[1] * scale_mm));
            pair(&mut o, 30, "0.0");
        }
        pair(&mut o, 0, "SEQEND");
        pair(&mut o, 8, CUT_LAYER);
    }
    for c in &plan.connectors {
        pair(&mut o, 0, "CIRCLE");
        pair(&mut o, 8, CONNECTOR_LAYER);
        pair(&mut o, 10, &num(c.center[0] * scale_mm));
        pair(&mut o, 20, &num(c.center[1] * scale_mm));
        pair(&mut o, 30, "0.0");
        pair(&mut o, 40, &num(c.radius * scale_mm));
    }
    pair(&mut o, 0, "ENDSEC");
    pair(&mut o, 0, "EOF");
    o
}

pub fn write_dxf(plan: &CutPlan, scale_mm: f64, path: &Path) -> Result<()> {
    std::fs::write(path, dxf_string(plan, scale_mm))?;
    Ok(())
}

/// Parses the subset emitted by [`dxf_string`]; coordinates come back in file units.
pub fn parse_dxf(text: &str) -> Result<CutPlan> {
    let lines: Vec<&str> = text.lines().collect();
    let mut pairs = Vec::with_capacity(lines.len() / 2);
    let mut k = 0;
    while k < lines.len() {
        if k + 1 >= lines.len() {
            return Err(Error::Parse { line: k + 1, msg: "group code without value".into() });
        }
        let code: i32 = lines[k]
            .trim()
            .parse()
            .map_err(|_| Error::Parse { line: k + 1, msg: format!("bad group code {:?}", lines[k]) })?;
        pairs.push((k + 1, code, lines[k + 1].trim()));
        k += 2;
    }

    let float = |line: usize, v: &str| -> Result<f64> {
        v.parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("bad number {v:?}") })
    };

    let mut plan = CutPlan::default();
    let mut section = String::new();
    let mut i = 0;
    let mut saw_eof = false;
    while i < pairs.len() {
        let (line, code, value) = pairs[i];
        if code != 0 {
            i += 1;
            continue;
        }
        match value {
            "SECTION" => {
                let (_, c2, name) = *pairs
                    .get(i + 1)
                    .ok_or(Error::Parse { line, msg: "SECTION without name".into() })?;
                if c2 != 2 {
                    return Err(Error::Parse { line, msg: "SECTION without name".into() });
                }
                section = name.to_string();
                i += 2;
            }
            "ENDSEC" => {
                section.clear();
                i += 1;
            }
            "EOF" => {
                saw_eof = true;
                break;
            }
            _ if section != "ENTITIES" => i += 1,
            "POLYLINE" => {
                let mut closed = false;
                let mut points = Vec::new();
                i += 1;
                while i < pairs.len() && pairs[i].1 != 0 {
                    if pairs[i].1 == 70 {
                        closed = (float(pairs[i].0, pairs[i].2)? as i64) & 1 == 1;
                    }
                    i += 1;
                }
                loop {
                    let Some(&(vline, c, v)) = pairs.get(i) else {
                        return Err(Error::Parse { line, msg: "POLYLINE without SEQEND".into() });
                    };
                    debug_assert_eq!(c, 0);
                    match v {
                        "VERTEX" => {
                            let (mut x, mut y) = (None, None);
                            i += 1;
                            while i < pairs.len() && pairs[i].1 != 0 {
                                match pairs[i].1 {
                                    10 => x = Some(float(pairs[i].0, pairs[i].2)?),
                                    20 => y = Some(float(pairs[i].0, pairs[i].2)?),
                                    _ => {}
                                }
                                i += 1;
                            }
                            match (x, y) {
                                (Some(x), Some(y)) => points.push([x, y]),
                                _ => return Err(Error::Parse { line: vline, msg: "VERTEX without coordinates".into() }),
                            }
                        }
                        "SEQEND" => {
                            i += 1;
                            while i < pairs.len() && pairs[i].1 != 0 {
                                i += 1;
                            }
                            break;
                        }
                        other => {
                            return Err(Error::Parse { line: vline, msg: format!("unexpected {other} inside POLYLINE") })
                        }
                    }
                }
                plan.paths.push(Polyline { points, closed });
            }
            "CIRCLE" => {
                let (mut x, mut y, mut r) = (None, None, None);
                i += 1;
                while i < pairs.len() && pairs[i].1 != 0 {
                    match pairs[i].1 {
                        10 => x = Some(float(pairs[i].0, pairs[i].2)?),
                        20 => y = Some(float(pairs[i].0, pairs[i].2)?),
                        40 => r = Some(float(pairs[i].0, pairs[i].2)?),
                        _ => {}
                    }
                    i += 1;
                }
                match (x, y, r) {
                    (Some(x), Some(y), Some(radius)) => plan.connectors.push(Connector { center: [x, y], radius }),
                    _ => return Err(Error::Parse { line, msg: "CIRCLE missing fields".into() }),
                }
            }
            other => return Err(Error::UnsupportedEntity(other.to_string())),
        }
    }
    if !saw_eof {
        return Err(Error::Parse { line: lines.len(), msg: "missing EOF marker".into() });
    }
    Ok(plan)
}

pub fn read_dxf(path: &Path) -> Result<CutPlan> {
    parse_dxf(&std::fs::read_to_string(path)?)
}
