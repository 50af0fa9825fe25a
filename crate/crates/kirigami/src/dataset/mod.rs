//! Feasible (silhouette, ratio field) pairs: Sobol sampling, filtering, storage, verification.

pub mod sobol;
mod sobol_table;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{GridShape, RatioField};
use crate::pipeline::{Problem, DEFAULT_PHI};
use crate::raster::SilhouetteMask;
use sobol::{Sobol, BLOCK};

pub use sobol::sobol_stream;

/// x = 10^z for z in [-1, 1].
pub fn z_to_ratio(shape: GridShape, z: &[f64]) -> Result<RatioField> {
    if let Some(v) = z.iter().find(|v| !(**v >= -1.0 && **v <= 1.0)) {
        return Err(Error::Domain(format!("log-ratio {v} outside [-1, 1]")));
    }
    RatioField::new(shape, z.iter().map(|v| 10f64.powf(*v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn offset(&self) -> u64 {
        *self as u64
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub problem: Problem,
    pub seed: u64,
    pub min_fraction: f64,
    pub max_fraction: f64,
    pub stall_window: usize,
    pub stall_rate: f64,
}

impl GenConfig {
    pub fn new(shape: GridShape, phi: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            problem: Problem::new(shape, phi)?,
            seed,
            min_fraction: 0.02,
            max_fraction: 0.95,
            stall_window: 10_000,
            stall_rate: 0.01,
        })
    }

    pub fn standard(seed: u64) -> Self {
        Self::new(GridShape::default(), DEFAULT_PHI, seed).expect("default config is valid")
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn block_start(&self, split: Split) -> u64 {
        1 + (3 * self.seed + split.offset()) * BLOCK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sobol_index: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub id: String,
    pub x: RatioField,
    pub y: SilhouetteMask,
    pub phi: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub ids: Vec<String>,
    pub count: usize,
    pub candidates: usize,
    pub acceptance_rate: f64,
    pub sobol_indices: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub config: GenConfig,
    pub config_hash: String,
    pub phi: f64,
    pub splits: BTreeMap<Split, SplitRecord>,
}

impl SplitManifest {
    pub fn new(config: GenConfig) -> Self {
        Self { config_hash: config.hash(), phi: config.problem.phi.phi(), config, splits: BTreeMap::new() }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Topology filter: one 4-connected component and foreground fraction within bounds.
pub fn topology_ok(mask: &SilhouetteMask, cfg: &GenConfig) -> bool {
    let f = mask.fraction();
    f >= cfg.min_fraction && f <= cfg.max_fraction && mask.components4() == 1
}

/// Draw Sobol candidates until `count` pass every filter.
pub fn generate_split(count: usize, split: Split, cfg: &GenConfig) -> Result<(Vec<DatasetSample>, SplitRecord)> {
    let shape = cfg.problem.shape;
    let mut sobol = Sobol::new(shape.cells())?;
    sobol.seek(cfg.block_start(split));
    let mut samples = Vec::with_capacity(count);
    let (mut candidates, mut window_hits, mut window_len) = (0usize, 0usize, 0usize);
    while samples.len() < count {
        let index = sobol.index();
        let z: Vec<f64> = sobol.next_unit().into_iter().map(|u| 2.0 * u - 1.0).collect();
        candidates += 1;
        window_len += 1;
        let x = z_to_ratio(shape, &z)?;
        if let Some(y) = cfg.problem.render(&x)? {
            if topology_ok(&y, cfg) {
                window_hits += 1;
                samples.push(DatasetSample {
                    id: format!("{}-{:05}", split.name(), samples.len()),
                    x,
                    y,
                    phi: cfg.problem.phi.phi(),
                    provenance: Provenance { sobol_index: index, seed: cfg.seed },
                });
            }
        }
        if window_len == cfg.stall_window {
            let rate = window_hits as f64 / window_len as f64;
            if rate < cfg.stall_rate {
                return Err(Error::Stall { rate, window: window_len });
            }
            window_hits = 0;
            window_len = 0;
        }
    }
    let record = SplitRecord {
        ids: samples.iter().map(|s| s.id.clone()).collect(),
        count: samples.len(),
        candidates,
        acceptance_rate: if candidates > 0 { samples.len() as f64 / candidates as f64 } else { 0.0 },
        sobol_indices: samples.iter().map(|s| s.provenance.sobol_index).collect(),
    };
    Ok((samples, record))
}

pub fn format_field(x: &RatioField) -> String {
    let mut s = String::new();
    for i in 0..x.shape.m {
        let row: Vec<String> = (0..x.shape.n).map(|j| format!("{:.16e}", x.get(i, j))).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Parses a whitespace-separated matrix; entries need not be positive.
pub fn parse_matrix(text: &str) -> Result<(GridShape, Vec<f64>)> {
    let mut values = Vec::new();
    let mut n = None;
    let mut m = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?;
        match n {
            None => n = Some(row.len()),
            Some(k) if k != row.len() => {
                return Err(Error::Parse { line: lineno + 1, msg: "ragged matrix".into() })
            }
            _ => {}
        }
        values.extend(row);
        m += 1;
    }
    let shape = GridShape::new(m, n.unwrap_or(0))?;
    Ok((shape, values))
}

pub fn parse_field(text: &str) -> Result<RatioField> {
    let (shape, values) = parse_matrix(text)?;
    RatioField::new(shape, values)
}

pub fn load_field(path: &Path) -> Result<RatioField> {
    parse_field(&std::fs::read_to_string(path)?)
}

fn sample_paths(dir: &Path, split: Split, id: &str) -> (PathBuf, PathBuf) {
    let d = dir.join(split.name());
    (d.join(format!("{id}.x.txt")), d.join(format!("{id}.pgm")))
}

pub fn write_split(dir: &Path, split: Split, samples: &[DatasetSample]) -> Result<()> {
    std::fs::create_dir_all(dir.join(split.name()))?;
    for s in samples {
        let (xp, yp) = sample_paths(dir, split, &s.id);
        std::fs::write(xp, format_field(&s.x))?;
        s.y.save_pgm(&yp)?;
    }
    Ok(())
}

/// Field and stored mask of one sample.
pub fn load_sample(dir: &Path, split: Split, id: &str) -> Result<(RatioField, SilhouetteMask)> {
    let (xp, yp) = sample_paths(dir, split, id);
    Ok((load_field(&xp)?, SilhouetteMask::load_pgm(&yp)?))
}

/// Generate, store and record the requested splits.
pub fn generate_dataset(dir: &Path, counts: &[(Split, usize)], cfg: &GenConfig) -> Result<SplitManifest> {
    let mut manifest = match SplitManifest::load(dir) {
        Ok(m) if m.config_hash == cfg.hash() => m,
        _ => SplitManifest::new(cfg.clone()),
    };
    for &(split, count) in counts {
        let (samples, record) = generate_split(count, split, cfg)?;
        let old = dir.join(split.name());
        if old.exists() {
            std::fs::remove_dir_all(&old)?;
        }
        write_split(dir, split, &samples)?;
        manifest.splits.insert(split, record);
    }
    manifest.save(dir)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: BTreeMap<Split, usize>,
    pub min_iou: BTreeMap<Split, f64>,
}

/// Re-render up to `sample_count` random samples per split and compare to the stored masks.
pub fn verify_dataset(dir: &Path, manifest: &SplitManifest, sample_count: usize, seed: u64) -> Result<VerifyReport> {
    let problem = &manifest.config.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport { checked: BTreeMap::new(), min_iou: BTreeMap::new() };
    let mut bad = Vec::new();
    let mut worst = 1.0f64;
    for (&split, record) in &manifest.splits {
        let k = sample_count.min(record.ids.len());
        let mut picks: Vec<usize> = sample(&mut rng, record.ids.len(), k).into_vec();
        picks.sort_unstable();
        let mut min_iou = 1.0f64;
        for p in picks {
            let id = &record.ids[p];
            let iou = match load_sample(dir, split, id) {
                Ok((x, y)) => match problem.render(&x) {
                    Ok(Some(r)) if r.same_size(&y) => r.iou(&y),
                    _ => 0.0,
                },
                Err(_) => 0.0,
            };
            if iou < 0.999 {
                bad.push(id.clone());
            }
            min_iou = min_iou.min(iou);
        }
        worst = worst.min(min_iou);
        report.checked.insert(split, k);
        report.min_iou.insert(split, min_iou);
    }
    if !bad.is_empty() {
        return Err(Error::Verification { ids: bad, min_iou: worst });
    }
    Ok(report)
}
