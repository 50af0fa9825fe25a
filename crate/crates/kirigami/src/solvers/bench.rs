use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{solve, Method, Objective, StopRule};
use crate::error::{Error, Result};
use crate::geometry::GridShape;
use crate::pipeline::Problem;
use crate::raster::SilhouetteMask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub grid: usize,
    pub method: String,
    pub target: String,
    pub seconds: f64,
    pub evals: usize,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "grid,method,target,seconds,evals";

    pub fn csv(&self) -> String {
        format!("{},{},{},{:.6},{}", self.grid, self.method, self.target, self.seconds, self.evals)
    }
}

/// Time each (grid, method, target) solve. Only the solve call is inside the timer.
pub fn grid_sweep_bench(
    grid_sizes: &[usize],
    targets: &[(String, SilhouetteMask)],
    methods: &[Method],
    phi: f64,
    stop: &StopRule,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if let Some(g) = grid_sizes.iter().find(|g| !(6..=24).contains(*g)) {
        return Err(Error::Config(format!("grid size {g} outside 6..=24")));
    }
    let mut rows = Vec::new();
    for &g in grid_sizes {
        let problem = Problem::new(GridShape::square(g), phi)?;
        for &method in methods {
            for (name, mask) in targets {
                let mut obj = Objective::new(problem.clone(), mask)?;
                let t0 = Instant::now();
                let run = solve(method, &mut obj, stop, seed);
                let seconds = t0.elapsed().as_secs_f64();
                rows.push(BenchRow {
                    grid: g,
                    method: method.name().to_string(),
                    target: name.clone(),
                    seconds,
                    evals: run.sim_calls,
                });
            }
        }
    }
    Ok(rows)
}
