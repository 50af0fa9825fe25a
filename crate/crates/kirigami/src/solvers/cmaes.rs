use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Method, Objective, SolverRun, StopReason, StopRule, Tracker};

/// lambda = 4 + floor(3 ln d).
pub fn cmaes_population(d: usize) -> usize {
    4 + (3.0 * (d as f64).ln()).floor() as usize
}

/// (mu/mu_w, lambda)-CMA-ES. Out-of-box samples are redrawn up to 10 times, then clamped.
pub fn solve_cmaes(obj: &mut Objective, stop: &StopRule, seed: u64) -> SolverRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let df = d as f64;
    let lambda = cmaes_population(d);
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / wsum).collect();
    let mueff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();

    let cs = (mueff + 2.0) / (df + mueff + 5.0);
    let ds = 1.0 + 2.0 * (((mueff - 1.0) / (df + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let cc = (4.0 + mueff / df) / (df + 4.0 + 2.0 * mueff / df);
    let c1 = 2.0 / ((df + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((df + 2.0).powi(2) + mueff));
    let chi_n = df.sqrt() * (1.0 - 1.0 / (4.0 * df) + 1.0 / (21.0 * df * df));
    let eigen_every = ((lambda as f64 / ((c1 + cmu) * df * 10.0)).ceil() as usize).max(1);

    let mut mean = DVector::from_vec(obj.random_point(&mut rng));
    let mut sigma = 0.3 * obj.width();
    let mut c = DMatrix::<f64>::identity(d, d);
    let mut b = DMatrix::<f64>::identity(d, d);
    let mut diag = DVector::<f64>::from_element(d, 1.0);
    let mut inv_sqrt_c = DMatrix::<f64>::identity(d, d);
    let mut ps = DVector::<f64>::zeros(d);
    let mut pc = DVector::<f64>::zeros(d);

    let mut tracker = Tracker::new(*stop);
    let mut gen = 0usize;
    let reason = loop {
        if obj.budget_left(stop) == 0 {
            break StopReason::Cap;
        }
        let mut pop: Vec<(f64, DVector<f64>)> = Vec::with_capacity(lambda);
        for _ in 0..lambda.min(obj.budget_left(stop)) {
            let mut x = DVector::zeros(d);
            for attempt in 0..=10 {
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                let y = &b * diag.component_mul(&z);
                x = &mean + sigma * y;
                if attempt == 10 || x.iter().all(|v| *v >= obj.lo && *v <= obj.hi) {
                    break;
                }
            }
            obj.clamp(x.as_mut_slice());
            let f = obj.eval(x.as_slice());
            pop.push((f, x));
        }
        if pop.len() < mu {
            break StopReason::Cap;
        }
        pop.sort_by(|a, b| a.0.total_cmp(&b.0));

        let old = mean.clone();
        mean = DVector::zeros(d);
        for (wi, (_, x)) in w.iter().zip(&pop) {
            mean += *wi * x;
        }
        let step = (&mean - &old) / sigma;
        ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mueff).sqrt() * (&inv_sqrt_c * &step);
        let gens = (gen + 1) as f64;
        let hsig = ps.norm() / (1.0 - (1.0 - cs).powf(2.0 * gens)).sqrt() / chi_n < 1.4 + 2.0 / (df + 1.0);
        let hs = if hsig { 1.0 } else { 0.0 };
        pc = (1.0 - cc) * &pc + hs * (cc * (2.0 - cc) * mueff).sqrt() * &step;
        let mut rank_mu = DMatrix::<f64>::zeros(d, d);
        for (wi, (_, x)) in w.iter().zip(&pop) {
            let y = (x - &old) / sigma;
            rank_mu.ger(*wi, &y, &y, 1.0);
        }
        c = (1.0 - c1 - cmu) * &c
            + c1 * (&pc * pc.transpose() + (1.0 - hs) * cc * (2.0 - cc) * &c)
            + cmu * rank_mu;
        sigma *= ((cs / ds) * (ps.norm() / chi_n - 1.0)).exp();
        sigma = sigma.min(10.0 * obj.width());
        gen += 1;

        if gen % eigen_every == 0 {
            c = 0.5 * (&c + c.transpose());
            let eig = SymmetricEigen::new(c.clone());
            b = eig.eigenvectors;
            diag = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
            let inv = diag.map(|v| 1.0 / v);
            inv_sqrt_c = &b * DMatrix::from_diagonal(&inv) * b.transpose();
        }

        if tracker.end_iteration_local(obj, obj.best_value(), mean.as_slice()) {
            break StopReason::Tolerance;
        }
    };
    obj.finish(Method::Cmaes, seed, reason, tracker.trace)
}
