use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Method, Objective, SolverRun, StopReason, StopRule, Tracker};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub particles: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self { particles: 24, inertia: 0.7, c1: 1.5, c2: 1.5 }
    }
}

/// Global-best PSO with uniform start, zero initial velocity and box clamping.
pub fn solve_pso(obj: &mut Objective, stop: &StopRule, seed: u64, params: &PsoParams) -> SolverRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let n = params.particles;
    let mut pos: Vec<Vec<f64>> = (0..n).map(|_| obj.random_point(&mut rng)).collect();
    let mut vel = vec![vec![0.0; d]; n];
    let mut pbest: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    let mut tracker = Tracker::new(*stop);

    for p in &pos {
        if obj.budget_left(stop) == 0 {
            break;
        }
        let f = obj.eval(p);
        pbest.push((f, p.clone()));
    }
    if pbest.len() < n {
        return obj.finish(Method::Pso, seed, StopReason::Cap, tracker.trace);
    }
    if tracker.end_iteration(obj) {
        return obj.finish(Method::Pso, seed, StopReason::Tolerance, tracker.trace);
    }

    let reason = loop {
        if obj.budget_left(stop) == 0 {
            break StopReason::Cap;
        }
        let g = obj.best_point().map(|p| p.to_vec()).unwrap_or_else(|| pbest[0].1.clone());
        for k in 0..n {
            if obj.budget_left(stop) == 0 {
                break;
            }
            for j in 0..d {
                let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                vel[k][j] = params.inertia * vel[k][j]
                    + params.c1 * r1 * (pbest[k].1[j] - pos[k][j])
                    + params.c2 * r2 * (g[j] - pos[k][j]);
                let next = pos[k][j] + vel[k][j];
                if next < obj.lo || next > obj.hi {
                    pos[k][j] = next.clamp(obj.lo, obj.hi);
                    vel[k][j] = 0.0;
                } else {
                    pos[k][j] = next;
                }
            }
            let f = obj.eval(&pos[k]);
            if f < pbest[k].0 {
                pbest[k] = (f, pos[k].clone());
            }
        }
        if obj.budget_left(stop) == 0 {
            tracker.end_iteration(obj);
            break StopReason::Cap;
        }
        if tracker.end_iteration(obj) {
            break StopReason::Tolerance;
        }
    };
    obj.finish(Method::Pso, seed, reason, tracker.trace)
}
