//! Derivative-free inverse-design baselines over the ratio field.

mod bench;
mod cmaes;
mod powell;
mod pso;
mod restart;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RatioField;
use crate::metrics::{siou_prepared, PreparedMask};
use crate::pipeline::Problem;
use crate::raster::SilhouetteMask;
use crate::sim::simulate;

pub use bench::{grid_sweep_bench, BenchRow};
pub use cmaes::{cmaes_population, solve_cmaes};
pub use powell::solve_powell;
pub use pso::{solve_pso, PsoParams};
pub use restart::{solve_random_restart, step_schedule, RestartParams};

pub const KEEP_CAPACITY: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub x_tol: f64,
    pub rel_obj_tol: f64,
    pub patience: usize,
    pub max_evals: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { x_tol: 1e-3, rel_obj_tol: 1e-3, patience: 5, max_evals: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cmaes,
    Pso,
    Rrls,
    Powell,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cmaes, Method::Pso, Method::Rrls, Method::Powell];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Cmaes => "cmaes",
            Method::Pso => "pso",
            Method::Rrls => "rrls",
            Method::Powell => "powell",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cmaes" => Ok(Method::Cmaes),
            "pso" => Ok(Method::Pso),
            "rrls" | "restart" => Ok(Method::Rrls),
            "powell" => Ok(Method::Powell),
            other => Err(Error::Config(format!("unknown method {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Tolerance,
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kept {
    pub siou: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRun {
    pub method: Method,
    pub seed: u64,
    pub best_x: RatioField,
    pub best_siou: f64,
    pub best_value: f64,
    pub feasible: bool,
    /// Objective evaluations, including infeasible decodes.
    pub evals_used: usize,
    /// Forward-simulator calls (#F).
    pub sim_calls: usize,
    pub kept: Vec<Kept>,
    pub stop_reason: StopReason,
    /// Best-so-far objective value after every iteration.
    pub trace: Vec<f64>,
}

/// Search coordinates: the ratios themselves (default) or their log10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Linear,
    Log,
}

/// Objective over a box. Feasible: 1 - sIoU. Infeasible: 1 + penalty, no simulator call.
#[derive(Clone)]
pub struct Objective {
    pub problem: Problem,
    pub target: PreparedMask,
    pub space: Space,
    pub infeasible_penalty: f64,
    pub lo: f64,
    pub hi: f64,
    evals: usize,
    sim_calls: usize,
    kept: Vec<Kept>,
    best: Option<(f64, Vec<f64>)>,
    // Generic function for smoke tests that bypass geometry.
    func: Option<fn(&[f64]) -> f64>,
    dim: usize,
}

impl Objective {
    pub fn new(problem: Problem, target: &SilhouetteMask) -> Result<Self> {
        if target.width != problem.raster.width || target.height != problem.raster.height {
            return Err(Error::Argument("target resolution differs from the raster config".into()));
        }
        let dim = problem.shape.cells();
        Ok(Self {
            problem,
            target: PreparedMask::new(target)?,
            space: Space::Linear,
            infeasible_penalty: 1.0,
            lo: 0.1,
            hi: 10.0,
            evals: 0,
            sim_calls: 0,
            kept: Vec::new(),
            best: None,
            func: None,
            dim,
        })
    }

    pub fn with_space(mut self, space: Space) -> Self {
        self.space = space;
        let (lo, hi) = match space {
            Space::Linear => (0.1, 10.0),
            Space::Log => (-1.0, 1.0),
        };
        self.lo = lo;
        self.hi = hi;
        self
    }

    /// Plain function over a box (no decoding, no simulator).
    pub fn function(dim: usize, lo: f64, hi: f64, f: fn(&[f64]) -> f64) -> Self {
        let mut template = SilhouetteMask::empty(4, 4);
        template.set(1, 1, true);
        let mut problem = Problem::new(crate::geometry::GridShape::new(1, dim.max(1)).expect("dim > 0"), crate::pipeline::DEFAULT_PHI)
            .expect("valid problem");
        problem.raster.width = 4;
        problem.raster.height = 4;
        Self {
            problem,
            target: PreparedMask::new(&template).expect("nonempty"),
            space: Space::Linear,
            infeasible_penalty: 1.0,
            lo,
            hi,
            evals: 0,
            sim_calls: 0,
            kept: Vec::new(),
            best: None,
            func: Some(f),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn sim_calls(&self) -> usize {
        self.sim_calls
    }

    pub fn best_value(&self) -> f64 {
        self.best.as_ref().map(|b| b.0).unwrap_or(f64::INFINITY)
    }

    pub fn best_point(&self) -> Option<&[f64]> {
        self.best.as_ref().map(|b| b.1.as_slice())
    }

    pub fn reset(&mut self) {
        self.evals = 0;
        self.sim_calls = 0;
        self.kept.clear();
        self.best = None;
    }

    pub fn to_field(&self, p: &[f64]) -> RatioField {
        let values = match self.space {
            Space::Linear => p.to_vec(),
            Space::Log => p.iter().map(|z| 10f64.powf(*z)).collect(),
        };
        RatioField { shape: self.problem.shape, values }
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for v in p.iter_mut() {
            *v = v.clamp(self.lo, self.hi);
        }
    }

    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random_range(self.lo..=self.hi)).collect()
    }

    /// Returns (objective value, sIoU if simulated).
    fn score(&mut self, p: &[f64]) -> (f64, Option<f64>) {
        if let Some(f) = self.func {
            return (f(p), None);
        }
        let x = self.to_field(p);
        let layout = match self.problem.decode(&x) {
            Ok(l) => l,
            Err(_) => return (1.0 + self.infeasible_penalty, None),
        };
        if !self.problem.feasible(&layout) {
            return (1.0 + self.infeasible_penalty, None);
        }
        self.sim_calls += 1;
        let s = simulate(&layout, &self.problem.raster)
            .ok()
            .and_then(|m| PreparedMask::light(&m).ok())
            .map(|pm| siou_prepared(&pm, &self.target, &self.problem.align).0)
            .unwrap_or(0.0);
        (1.0 - s, Some(s))
    }

    pub fn eval(&mut self, p: &[f64]) -> f64 {
        debug_assert!(p.iter().all(|v| *v >= self.lo && *v <= self.hi));
        self.evals += 1;
        let (f, s) = self.score(p);
        if let Some(s) = s {
            self.keep(s, p);
        }
        if f < self.best_value() {
            self.best = Some((f, p.to_vec()));
        }
        f
    }

    fn keep(&mut self, siou: f64, p: &[f64]) {
        if self.kept.len() < KEEP_CAPACITY {
            self.kept.push(Kept { siou, x: p.to_vec() });
            return;
        }
        let (wi, worst) = self
            .kept
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.siou.total_cmp(&b.1.siou))
            .map(|(i, k)| (i, k.siou))
            .expect("capacity > 0");
        if siou > worst {
            self.kept[wi] = Kept { siou, x: p.to_vec() };
        }
    }

    pub fn budget_left(&self, stop: &StopRule) -> usize {
        stop.max_evals.saturating_sub(self.evals)
    }

    fn finish(&self, method: Method, seed: u64, stop_reason: StopReason, trace: Vec<f64>) -> SolverRun {
        let mut kept = self.kept.clone();
        kept.sort_by(|a, b| b.siou.total_cmp(&a.siou));
        let (best_p, best_siou, feasible) = match kept.first() {
            Some(k) => (k.x.clone(), k.siou, true),
            None => (
                self.best.as_ref().map(|b| b.1.clone()).unwrap_or_else(|| vec![self.lo; self.dim]),
                if self.func.is_some() { 1.0 - self.best_value() } else { 0.0 },
                self.func.is_some(),
            ),
        };
        SolverRun {
            method,
            seed,
            best_x: self.to_field(&best_p),
            best_siou,
            best_value: self.best_value(),
            feasible,
            evals_used: self.evals,
            sim_calls: self.sim_calls,
            kept,
            stop_reason,
            trace,
        }
    }
}

/// Per-iteration stopping bookkeeping shared by all methods.
pub(crate) struct Tracker {
    stop: StopRule,
    prev: Option<(f64, Vec<f64>)>,
    calm: usize,
    pub trace: Vec<f64>,
}

impl Tracker {
    pub fn new(stop: StopRule) -> Self {
        Self { stop, prev: None, calm: 0, trace: Vec::new() }
    }

    /// Record the end of an iteration; true when the tolerance rule fires.
    pub fn end_iteration(&mut self, obj: &Objective) -> bool {
        let f = obj.best_value();
        let x = obj.best_point().map(|p| p.to_vec()).unwrap_or_default();
        self.trace.push(f);
        self.observe(f, x)
    }

    /// Same rule applied to a caller-held incumbent (one restart of a multi-start method).
    pub fn end_iteration_local(&mut self, obj: &Objective, f: f64, x: &[f64]) -> bool {
        self.trace.push(obj.best_value());
        self.observe(f, x.to_vec())
    }

    fn observe(&mut self, f: f64, x: Vec<f64>) -> bool {
        let quiet = match &self.prev {
            Some((pf, px)) => {
                let moved = px.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let improve = (pf - f) / pf.abs().max(1e-12);
                moved < self.stop.x_tol && improve < self.stop.rel_obj_tol
            }
            None => false,
        };
        self.calm = if quiet { self.calm + 1 } else { 0 };
        self.prev = Some((f, x));
        self.calm >= self.stop.patience
    }

    /// Restart the patience count from a known incumbent.
    pub fn restart_from(&mut self, f: f64, x: &[f64]) {
        self.prev = Some((f, x.to_vec()));
        self.calm = 0;
    }
}

pub fn solve(method: Method, obj: &mut Objective, stop: &StopRule, seed: u64) -> SolverRun {
    match method {
        Method::Cmaes => solve_cmaes(obj, stop, seed),
        Method::Pso => solve_pso(obj, stop, seed, &PsoParams::default()),
        Method::Rrls => solve_random_restart(obj, stop, seed, &RestartParams::default()),
        Method::Powell => solve_powell(obj, stop, seed),
    }
}

/// Independent runs from fresh counters; the run with the best sIoU is returned with the
/// summed evaluation counts.
pub fn best_of_k(method: Method, template: &Objective, stop: &StopRule, seeds: &[u64]) -> Result<SolverRun> {
    if seeds.is_empty() {
        return Err(Error::Argument("best_of_k needs at least one seed".into()));
    }
    let mut best: Option<SolverRun> = None;
    let (mut evals, mut sims) = (0, 0);
    for &seed in seeds {
        let mut obj = template.clone();
        obj.reset();
        let run = solve(method, &mut obj, stop, seed);
        evals += run.evals_used;
        sims += run.sim_calls;
        let better = match &best {
            None => true,
            Some(b) => run.best_siou > b.best_siou,
        };
        if better {
            best = Some(run);
        }
    }
    let mut run = best.expect("at least one run");
    run.evals_used = evals;
    run.sim_calls = sims;
    Ok(run)
}
