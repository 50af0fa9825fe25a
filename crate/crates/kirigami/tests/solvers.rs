use std::f64::consts::FRAC_PI_2;

use approx::assert_abs_diff_eq;
use kirigami::geometry::{GridShape, RatioField};
use kirigami::pipeline::Problem;
use kirigami::solvers::*;
use kirigami::targets::builtin;
use kirigami::Error;

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - 5.0) * (v - 5.0)).sum()
}

fn bowl(x: &[f64]) -> f64 {
    (x[0] - 3.0).powi(2) + 4.0 * (x[1] - 7.5).powi(2) + 0.5 * (x[0] - 3.0) * (x[1] - 7.5)
}

fn separable(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (v - (1.0 + i as f64)).powi(2) * (1.0 + i as f64)).sum()
}

fn linear_in_box(x: &[f64]) -> f64 {
    assert!(x.iter().all(|v| (0.1..=10.0).contains(v)), "out-of-box evaluation {x:?}");
    x[0] - 2.0 * x[1] + 0.5 * x[2]
}

fn constant(_: &[f64]) -> f64 {
    1.0
}

fn nonincreasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn cmaes_population_formula() {
    assert_eq!(cmaes_population(100), 17);
    assert_eq!(cmaes_population(10), 10);
    assert_eq!(cmaes_population(36), 14);
}

#[test]
fn cmaes_sphere_smoke() {
    let mut obj = Objective::function(10, 0.1, 10.0, sphere);
    let run = solve_cmaes(&mut obj, &StopRule::default(), 1);
    assert!(run.best_value < 1e-4, "f = {}", run.best_value);
    assert!(run.evals_used <= 1000);
    assert!(nonincreasing(&run.trace));
}

#[test]
fn cmaes_is_deterministic() {
    let a = solve_cmaes(&mut Objective::function(10, 0.1, 10.0, sphere), &StopRule::default(), 7);
    let b = solve_cmaes(&mut Objective::function(10, 0.1, 10.0, sphere), &StopRule::default(), 7);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.best_x, b.best_x);
}

#[test]
fn pso_first_generation_is_the_swarm() {
    let stop = StopRule { max_evals: 24, ..StopRule::default() };
    let run = solve_pso(&mut Objective::function(10, 0.1, 10.0, sphere), &stop, 0, &PsoParams::default());
    assert_eq!(run.evals_used, 24);
    assert_eq!(run.trace.len(), 1);
}

#[test]
fn pso_sphere_smoke() {
    let run = solve_pso(&mut Objective::function(10, 0.1, 10.0, sphere), &StopRule::default(), 3, &PsoParams::default());
    assert!(run.best_value < 1e-2, "f = {}", run.best_value);
    assert!(nonincreasing(&run.trace));
}

#[test]
fn frozen_swarm_keeps_initial_best() {
    let frozen = PsoParams { inertia: 0.0, c1: 0.0, c2: 0.0, ..PsoParams::default() };
    let stop = StopRule { max_evals: 24, ..StopRule::default() };
    let first = solve_pso(&mut Objective::function(6, 0.1, 10.0, sphere), &stop, 5, &frozen);
    let long = solve_pso(&mut Objective::function(6, 0.1, 10.0, sphere), &StopRule::default(), 5, &frozen);
    assert_eq!(first.best_value, long.best_value);
    assert_eq!(long.stop_reason, StopReason::Tolerance);
}

#[test]
fn restart_step_schedule() {
    let p = RestartParams::default();
    let steps: Vec<f64> = (0..4).map(|k| step_schedule(&p, k)).collect();
    assert_eq!(steps, vec![0.25, 0.125, 0.0625, 0.03125]);
}

#[test]
fn restart_on_constant_objective_stops_early() {
    let stop = StopRule::default();
    let params = RestartParams::default();
    let run = solve_random_restart(&mut Objective::function(4, 0.1, 10.0, constant), &stop, 0, &params);
    // Each restart: one start evaluation plus `patience` quiet batches.
    assert_eq!(run.evals_used, params.restarts * (1 + stop.patience * params.batch));
    assert_eq!(run.stop_reason, StopReason::Tolerance);
}

#[test]
fn restart_sphere_improves_monotonically() {
    let run = solve_random_restart(&mut Objective::function(10, 0.1, 10.0, sphere), &StopRule::default(), 2, &RestartParams::default());
    assert!(nonincreasing(&run.trace));
    assert!(run.best_value < run.trace[0]);
    assert!(run.evals_used <= 1000);
}

#[test]
fn powell_quadratic_bowl() {
    let run = solve_powell(&mut Objective::function(2, 0.1, 10.0, bowl), &StopRule::default(), 4);
    let x = &run.best_x.values;
    assert!((x[0] - 3.0).abs() < 1e-3 && (x[1] - 7.5).abs() < 1e-3, "{x:?}");
}

#[test]
fn powell_respects_bounds_on_linear_objective() {
    let run = solve_powell(&mut Objective::function(3, 0.1, 10.0, linear_in_box), &StopRule::default(), 0);
    let x = &run.best_x.values;
    assert_abs_diff_eq!(x[0], 0.1, epsilon = 1e-3);
    assert_abs_diff_eq!(x[1], 10.0, epsilon = 1e-3);
    assert_abs_diff_eq!(x[2], 0.1, epsilon = 1e-3);
}

#[test]
fn powell_first_sweep_solves_separable() {
    let stop = StopRule::default();
    let mut obj = Objective::function(4, 0.1, 10.0, separable);
    let run = solve_powell(&mut obj, &stop, 9);
    // Coordinate line searches already land within tolerance of each minimizer.
    for (i, v) in run.best_x.values.iter().enumerate() {
        assert!((v - (1.0 + i as f64)).abs() < 1e-3, "coordinate {i}: {v}");
    }
    assert!(run.trace[0] < 1e-5);
}

#[test]
fn every_method_respects_the_cap() {
    for m in Method::ALL {
        let run = solve(m, &mut Objective::function(20, 0.1, 10.0, sphere), &StopRule::default(), 1);
        assert!(run.evals_used <= 1000, "{m:?}");
        assert!(nonincreasing(&run.trace), "{m:?}");
    }
}

fn tiny_problem() -> (Problem, kirigami::raster::SilhouetteMask) {
    let problem = Problem::new(GridShape::new(2, 2).unwrap(), FRAC_PI_2).unwrap();
    let x = RatioField::new(problem.shape, vec![2.0, 5.0, 6.0, 3.0]).unwrap();
    let target = problem.render(&x).unwrap().unwrap();
    (problem, target)
}

#[test]
fn realizable_two_by_two_is_solved_by_all() {
    let (problem, target) = tiny_problem();
    for m in Method::ALL {
        let mut obj = Objective::new(problem.clone(), &target).unwrap();
        let run = solve(m, &mut obj, &StopRule::default(), 0);
        assert!(run.best_siou >= 0.98, "{m:?}: {}", run.best_siou);
        assert!(run.feasible);
        assert!(problem.feasible(&problem.decode(&run.best_x).unwrap()));
        assert!(run.kept.len() <= KEEP_CAPACITY);
        assert_eq!(run.best_siou, run.kept[0].siou);
        assert!(run.sim_calls <= run.evals_used && run.evals_used <= 1000);
    }
}

#[test]
fn best_of_k_accounting() {
    let (problem, target) = tiny_problem();
    let template = Objective::new(problem, &target).unwrap();
    let stop = StopRule { max_evals: 120, ..StopRule::default() };
    let single = solve(Method::Cmaes, &mut template.clone(), &stop, 3);
    let k1 = best_of_k(Method::Cmaes, &template, &stop, &[3]).unwrap();
    assert_eq!(single, k1);
    let runs: Vec<SolverRun> = [3, 4, 5, 6].iter().map(|s| solve(Method::Cmaes, &mut template.clone(), &stop, *s)).collect();
    let k4 = best_of_k(Method::Cmaes, &template, &stop, &[3, 4, 5, 6]).unwrap();
    assert_eq!(k4.evals_used, runs.iter().map(|r| r.evals_used).sum::<usize>());
    assert_eq!(k4.sim_calls, runs.iter().map(|r| r.sim_calls).sum::<usize>());
    let k2 = best_of_k(Method::Cmaes, &template, &stop, &[3, 4]).unwrap();
    assert!(k2.best_siou >= k1.best_siou && k4.best_siou >= k2.best_siou);
    assert!(matches!(best_of_k(Method::Pso, &template, &stop, &[]), Err(Error::Argument(_))));
}

#[test]
fn infeasible_candidates_count_budget_but_not_sim_calls() {
    let (mut problem, target) = tiny_problem();
    problem.reward.tau_ov = -1.0;
    let mut obj = Objective::new(problem, &target).unwrap();
    let stop = StopRule { max_evals: 50, ..StopRule::default() };
    let run = solve(Method::Pso, &mut obj, &stop, 0);
    assert_eq!(run.sim_calls, 0);
    assert_eq!(run.evals_used, 50);
    assert!(!run.feasible);
    assert!(run.kept.is_empty());
}

#[test]
fn method_names_parse() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert!(matches!("nelder".parse::<Method>(), Err(Error::Config(_))));
}

#[test]
fn bench_rows_and_grid_range() {
    let raster = kirigami::sim::RasterConfig::default();
    let targets = vec![("circle".to_string(), builtin("circle", &raster).unwrap())];
    let stop = StopRule { max_evals: 30, ..StopRule::default() };
    let rows = grid_sweep_bench(&[6], &targets, &[Method::Pso, Method::Powell], FRAC_PI_2, &stop, 0).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(BenchRow::CSV_HEADER, "grid,method,target,seconds,evals");
    assert!(rows[0].csv().starts_with("6,pso,circle,"));
    assert!(rows.iter().all(|r| r.seconds > 0.0 && r.evals <= 30));
    assert!(matches!(grid_sweep_bench(&[5], &targets, &[Method::Pso], FRAC_PI_2, &stop, 0), Err(Error::Config(_))));
    assert!(grid_sweep_bench(&[25], &targets, &[Method::Pso], FRAC_PI_2, &stop, 0).is_err());
}
