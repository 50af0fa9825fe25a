use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Method, Objective, SolverRun, StopReason, StopRule, Tracker};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Range of t keeping x + t u inside the box.
fn box_range(obj: &Objective, x: &[f64], u: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (xi, ui) in x.iter().zip(u) {
        if *ui > 0.0 {
            lo = lo.max((obj.lo - xi) / ui);
            hi = hi.min((obj.hi - xi) / ui);
        } else if *ui < 0.0 {
            lo = lo.max((obj.hi - xi) / ui);
            hi = hi.min((obj.lo - xi) / ui);
        }
    }
    (lo.min(0.0), hi.max(0.0))
}

fn point(obj: &Objective, x: &[f64], u: &[f64], t: f64) -> Vec<f64> {
    let mut p: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + t * b).collect();
    obj.clamp(&mut p);
    p
}

/// Golden-section search on the box-feasible segment. Returns the best point seen
/// (the start point included) and its value.
pub(crate) fn line_min(obj: &mut Objective, stop: &StopRule, x: &[f64], fx: f64, u: &[f64]) -> (Vec<f64>, f64) {
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best = (x.to_vec(), fx);
    if umax == 0.0 {
        return best;
    }
    let (mut a, mut b) = box_range(obj, x, u);
    if b - a <= 0.0 {
        return best;
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let eval = |obj: &mut Objective, t: f64, best: &mut (Vec<f64>, f64)| -> Option<f64> {
        if obj.budget_left(stop) == 0 {
            return None;
        }
        let p = point(obj, x, u, t);
        let f = obj.eval(&p);
        if f < best.1 {
            *best = (p, f);
        }
        Some(f)
    };
    let Some(mut fc) = eval(obj, c, &mut best) else { return best };
    let Some(mut fd) = eval(obj, d, &mut best) else { return best };
    while (b - a) * umax > stop.x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            match eval(obj, c, &mut best) {
                Some(f) => fc = f,
                None => break,
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            match eval(obj, d, &mut best) {
                Some(f) => fd = f,
                None => break,
            }
        }
    }
    best
}

/// Powell's direction-set method with bounded golden-section line searches.
pub fn solve_powell(obj: &mut Objective, stop: &StopRule, seed: u64) -> SolverRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let mut dirs: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut x = obj.random_point(&mut rng);
    let mut fx = obj.eval(&x);
    let mut tracker = Tracker::new(*stop);

    let reason = loop {
        if obj.budget_left(stop) == 0 {
            break StopReason::Cap;
        }
        let (x0, f0) = (x.clone(), fx);
        let (mut big, mut big_i) = (0.0, 0);
        for (i, u) in dirs.iter().enumerate() {
            let before = fx;
            let (nx, nf) = line_min(obj, stop, &x, fx, u);
            x = nx;
            fx = nf;
            if before - fx > big {
                big = before - fx;
                big_i = i;
            }
            if obj.budget_left(stop) == 0 {
                break;
            }
        }
        if obj.budget_left(stop) > 0 {
            let u: Vec<f64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let ext: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
            let inside = ext.iter().all(|v| *v >= obj.lo && *v <= obj.hi);
            if inside && u.iter().any(|v| *v != 0.0) {
                let fe = obj.eval(&ext);
                if fe < f0 {
                    let t = 2.0 * (f0 - 2.0 * fx + fe) * (f0 - fx - big).powi(2) - big * (f0 - fe).powi(2);
                    if t < 0.0 {
                        let (nx, nf) = line_min(obj, stop, &x, fx, &u);
                        x = nx;
                        fx = nf;
                        dirs.remove(big_i);
                        dirs.push(u);
                    }
                }
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
    obj.finish(Method::Powell, seed, reason, tracker.trace)
}
