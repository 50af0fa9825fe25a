use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Method, Objective, SolverRun, StopReason, StopRule, Tracker};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartParams {
    pub restarts: usize,
    pub batch: usize,
    /// Initial step as a fraction of the box width.
    pub step: f64,
    pub shrink: f64,
}

impl Default for RestartParams {
    fn default() -> Self {
        Self { restarts: 8, batch: 10, step: 0.25, shrink: 0.5 }
    }
}

/// Step fractions used after successive non-improving batches.
pub fn step_schedule(params: &RestartParams, k: usize) -> f64 {
    params.step * params.shrink.powi(k as i32)
}

/// Random-restart local search with Gaussian proposal batches and a shrinking step.
pub fn solve_random_restart(obj: &mut Objective, stop: &StopRule, seed: u64, params: &RestartParams) -> SolverRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let per_restart = stop.max_evals / params.restarts.max(1);
    let mut tracker = Tracker::new(*stop);
    let mut reason = StopReason::Tolerance;

    for _ in 0..params.restarts {
        if obj.budget_left(stop) == 0 {
            reason = StopReason::Cap;
            break;
        }
        let start_evals = obj.evals();
        let mut x = obj.random_point(&mut rng);
        let mut fx = obj.eval(&x);
        let mut step = params.step;
        tracker.restart_from(fx, &x);
        loop {
            let used = obj.evals() - start_evals;
            let room = per_restart.saturating_sub(used).min(obj.budget_left(stop));
            if room == 0 {
                break;
            }
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..params.batch.min(room) {
                let mut y: Vec<f64> = (0..d)
                    .map(|j| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        x[j] + step * obj.width() * z
                    })
                    .collect();
                obj.clamp(&mut y);
                let fy = obj.eval(&y);
                if best.as_ref().is_none_or(|b| fy < b.0) {
                    best = Some((fy, y));
                }
            }
            match best {
                Some((fy, y)) if fy < fx => {
                    x = y;
                    fx = fy;
                }
                _ => step *= params.shrink,
            }
            if tracker.end_iteration_local(obj, fx, &x) {
                break;
            }
        }
        if obj.budget_left(stop) == 0 {
            reason = StopReason::Cap;
            break;
        }
    }
    obj.finish(Method::Rrls, seed, reason, tracker.trace)
}
