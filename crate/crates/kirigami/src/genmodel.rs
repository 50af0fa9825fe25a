//! Flow-matching loss, minibatch OT pairing, Euler sampling, and group-relative weighting
//! with a Gaussian mean-field policy that closes the loop without a neural network.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridShape, RatioField};
use crate::metrics::PreparedMask;
use crate::pipeline::Problem;

pub trait VelocityField<C> {
    fn velocity(&self, x: &[f64], t: f64, cond: &C) -> Vec<f64>;
}

impl<C, F: Fn(&[f64], f64, &C) -> Vec<f64>> VelocityField<C> for F {
    fn velocity(&self, x: &[f64], t: f64, cond: &C) -> Vec<f64> {
        self(x, t, cond)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub t: f64,
    pub xt: Vec<f64>,
    pub target_velocity: Vec<f64>,
}

impl FlowPath {
    pub fn new(x0: &[f64], x1: &[f64], t: f64) -> Self {
        let xt = x0.iter().zip(x1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let target_velocity = x0.iter().zip(x1).map(|(a, b)| b - a).collect();
        Self { x0: x0.to_vec(), x1: x1.to_vec(), t, xt, target_velocity }
    }
}

pub fn cfm_sample_loss<C, V: VelocityField<C>>(v: &V, x0: &[f64], x1: &[f64], t: f64, cond: &C) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    if x0.len() != x1.len() {
        return Err(Error::Argument("x0 and x1 differ in size".into()));
    }
    let path = FlowPath::new(x0, x1, t);
    let out = v.velocity(&path.xt, t, cond);
    if out.len() != x0.len() || out.iter().any(|o| !o.is_finite()) {
        return Err(Error::Numeric { step: 0, msg: "velocity field returned a non-finite or misshapen output".into() });
    }
    Ok(out.iter().zip(&path.target_velocity).map(|(a, b)| (a - b) * (a - b)).sum())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimum-cost assignment for a square cost matrix (row i -> column result[i]).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials over rows (u) and columns (v); way[j] tracks the augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Permutation pi minimizing sum_i |x0_i - x1_pi(i)|^2.
pub fn ot_coupling(base: &[Vec<f64>], data: &[Vec<f64>]) -> Result<Vec<usize>> {
    if base.len() != data.len() {
        return Err(Error::Argument(format!("batch sizes differ: {} vs {}", base.len(), data.len())));
    }
    let cost: Vec<Vec<f64>> = base.iter().map(|a| data.iter().map(|b| sq_dist(a, b)).collect()).collect();
    Ok(hungarian(&cost))
}

pub fn coupling_cost(base: &[Vec<f64>], data: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| sq_dist(&base[i], &data[j])).sum()
}

/// Left-endpoint Euler steps from t = 0 to t = 1.
pub fn euler_integrate<C, V: VelocityField<C>>(v: &V, x0: &[f64], cond: &C, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Argument("steps must be at least 1".into()));
    }
    let h = 1.0 / steps as f64;
    let mut x = x0.to_vec();
    for k in 0..steps {
        let dx = v.velocity(&x, k as f64 / steps as f64, cond);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += h * di;
        }
        if x.iter().any(|xi| !xi.is_finite()) {
            return Err(Error::Numeric { step: k, msg: "non-finite state".into() });
        }
    }
    Ok(x)
}

pub const GRPO_EPS: f64 = 1e-8;

/// (r - mean) / (population std + eps).
pub fn grpo_advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::Argument(format!("group size {g} < 2")));
    }
    let mu = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / g as f64;
    let sd = var.sqrt();
    Ok(rewards.iter().map(|r| (r - mu) / (sd + epsilon)).collect())
}

/// exp(A/T) normalized to mean 1, computed with the max subtracted.
pub fn grpo_weights(advantages: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature {temperature} must be positive")));
    }
    if advantages.is_empty() {
        return Ok(vec![]);
    }
    let m = advantages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = advantages.iter().map(|a| ((a - m) / temperature).exp()).collect();
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    Ok(e.iter().map(|v| v / mean).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoGroup {
    /// Log10-space samples before clamping.
    pub candidates: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub sious: Vec<f64>,
    pub tvs: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub advantages: Vec<f64>,
    pub weights: Vec<f64>,
    pub temperature: f64,
    pub epsilon: f64,
}

impl GrpoGroup {
    pub fn from_rewards(candidates: Vec<Vec<f64>>, rewards: Vec<f64>, temperature: f64, epsilon: f64) -> Result<Self> {
        let g = rewards.len() as f64;
        let mu = rewards.iter().sum::<f64>() / g;
        let sigma = (rewards.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / g).sqrt();
        let advantages = grpo_advantages(&rewards, epsilon)?;
        let weights = grpo_weights(&advantages, temperature)?;
        let n = rewards.len();
        Ok(Self {
            candidates,
            rewards,
            sious: vec![0.0; n],
            tvs: vec![0.0; n],
            mu,
            sigma,
            advantages,
            weights,
            temperature,
            epsilon,
        })
    }

    pub fn best_index(&self) -> usize {
        (0..self.rewards.len()).max_by(|a, b| self.rewards[*a].total_cmp(&self.rewards[*b])).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPolicy {
    pub shape: GridShape,
    pub mean_z: Vec<f64>,
    pub noise_scale: f64,
    pub learning_rate: f64,
}

impl MeanFieldPolicy {
    pub fn new(shape: GridShape, mean_z: Vec<f64>) -> Self {
        Self { shape, mean_z, noise_scale: 0.15, learning_rate: 0.3 }
    }

    /// Mean drawn uniformly from [-spread, spread] per cell.
    pub fn random<R: Rng>(shape: GridShape, spread: f64, rng: &mut R) -> Self {
        let mean = (0..shape.cells()).map(|_| rng.random_range(-spread..=spread)).collect();
        Self::new(shape, mean)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.mean_z
            .iter()
            .map(|m| {
                let n: f64 = StandardNormal.sample(rng);
                m + self.noise_scale * n
            })
            .collect()
    }

    /// Ratios for a log-space sample, clamped into [0.1, 10].
    pub fn to_field(&self, z: &[f64]) -> RatioField {
        RatioField { shape: self.shape, values: z.iter().map(|v| 10f64.powf(v.clamp(-1.0, 1.0))).collect() }
    }

    pub fn mean_field(&self) -> RatioField {
        self.to_field(&self.mean_z)
    }
}

/// mean += lr * (1/G) * sum_g w_g (z_g - mean).
pub fn grpo_update(policy: &MeanFieldPolicy, group: &GrpoGroup) -> MeanFieldPolicy {
    let g = group.candidates.len().max(1) as f64;
    let mut next = policy.clone();
    for (k, m) in next.mean_z.iter_mut().enumerate() {
        let step: f64 = group.candidates.iter().zip(&group.weights).map(|(z, w)| w * (z[k] - policy.mean_z[k])).sum();
        *m += policy.learning_rate * step / g;
    }
    next
}

/// Environment: one call = decode, checks, and (unless the decode failed) simulation.
pub struct Env {
    pub problem: Problem,
    pub target: PreparedMask,
    pub calls: usize,
}

impl Env {
    pub fn new(problem: Problem, target: &crate::raster::SilhouetteMask) -> Result<Self> {
        Ok(Self { target: PreparedMask::new(target)?, problem, calls: 0 })
    }
}

pub fn grpo_rollout<R: Rng>(
    policy: &MeanFieldPolicy,
    env: &mut Env,
    group_size: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<GrpoGroup> {
    let mut cands = Vec::with_capacity(group_size);
    let mut rewards = Vec::with_capacity(group_size);
    let mut sious = Vec::with_capacity(group_size);
    let mut tvs = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let z = policy.sample(rng);
        let x = policy.to_field(&z);
        env.calls += 1;
        let (r, s) = match env.problem.evaluate(&x, &env.target) {
            Ok((res, _)) => (res.reward, res.siou),
            Err(_) => (-env.problem.reward.pen_fail, 0.0),
        };
        tvs.push(crate::metrics::total_variation(&x));
        cands.push(z);
        rewards.push(r);
        sious.push(s);
    }
    let mut group = GrpoGroup::from_rewards(cands, rewards, temperature, GRPO_EPS)?;
    group.sious = sious;
    group.tvs = tvs;
    Ok(group)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub call_count: usize,
    pub rewards: Vec<f64>,
    pub mean_reward: f64,
    pub best_siou: f64,
    pub tv_of_best: f64,
}

/// Rollout/update loop until `calls` environment calls have been spent.
pub fn train_grpo<R: Rng>(
    policy: &mut MeanFieldPolicy,
    env: &mut Env,
    calls: usize,
    group_size: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<Vec<TraceRecord>> {
    let mut trace = Vec::new();
    while env.calls + group_size <= calls {
        let group = grpo_rollout(policy, env, group_size, temperature, rng)?;
        *policy = grpo_update(policy, &group);
        let b = group.best_index();
        trace.push(TraceRecord {
            call_count: env.calls,
            rewards: group.rewards.clone(),
            mean_reward: group.mu,
            best_siou: group.sious.iter().cloned().fold(0.0, f64::max),
            tv_of_best: group.tvs[b],
        });
    }
    Ok(trace)
}
