//! Solver outputs against exhaustive grids on small fixtures.

use l1bound::design::{build_tv_system, CoefVector, FunctionSystem, NoiseFamily, SyntheticInstance};
use l1bound::epl::{brute_force_sup, draw_xi, sup_base_process, AscentOptions, Geometry, LossProcess};
use l1bound::estimator::{penalty, solve_penalized, LambdaGrid, LassoProblem, LossModel};
use l1bound::mc::rng_from_seed;
use rand::Rng;

fn random_system(m: usize, n: usize, seed: u64) -> FunctionSystem<f64> {
    let mut rng = rng_from_seed(seed);
    let rows = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    FunctionSystem::from_rows(rows).unwrap()
}

#[test]
fn base_sup_matches_brute_force_up_to_three_dims() {
    for (case, m) in [(0u64, 1usize), (1, 2), (2, 2), (3, 3), (4, 3), (5, 3)] {
        let sys = random_system(m, 6, 100 + case);
        let geo = Geometry::new(sys.gram());
        let xi = draw_xi(&sys, 7 + case).xi;
        for (eps, radius) in [(0.1, 1.0), (0.3, 0.3), (1.0, 0.2), (0.5, 0.7)] {
            let got = sup_base_process(&geo, &xi, eps, radius, 1e-9).unwrap();
            let brute = brute_force_sup(&sys.gram(), &xi, eps, radius, 400).unwrap();
            assert!(
                (got.value - brute).abs() <= 1e-6 * (1.0 + brute),
                "m = {m}, eps = {eps}, M = {radius}: solver {} vs grid {brute}",
                got.value
            );
        }
    }
}

#[test]
fn tv_sup_matches_brute_force() {
    let sys = build_tv_system::<f64>(12, 3).unwrap();
    let geo = Geometry::new(sys.gram());
    for seed in 0..5 {
        let xi = draw_xi(&sys, seed).xi;
        let got = sup_base_process(&geo, &xi, 0.4, 0.8, 1e-9).unwrap().value;
        let brute = brute_force_sup(&sys.gram(), &xi, 0.4, 0.8, 400).unwrap();
        assert!((got - brute).abs() <= 1e-6 * (1.0 + brute));
    }
}

fn lad_fixture(m: usize, n: usize, seed: u64) -> (FunctionSystem<f64>, Vec<f64>) {
    let sys = random_system(m, n, seed);
    let mut rng = rng_from_seed(seed + 1);
    let y = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    (sys, y)
}

#[test]
fn lad_lasso_matches_grid_in_three_dims() {
    let (sys, y) = lad_fixture(3, 7, 21);
    let lambda = 0.05;
    let problem = LassoProblem::new(LossModel::Absolute { half_width: 1.0 }, &sys, &y).unwrap();
    let fit = problem.solve(lambda, 1e-8, None).unwrap();
    let mut best = f64::INFINITY;
    let steps = 400;
    let h = 4.0 / steps as f64;
    for a in 0..=steps {
        for b in 0..=steps {
            for c in 0..=steps {
                let t = [-2.0 + a as f64 * h, -2.0 + b as f64 * h, -2.0 + c as f64 * h];
                best = best.min(problem.objective(&t, lambda));
            }
        }
    }
    assert!(fit.objective <= best + 1e-9, "solver {} above grid {best}", fit.objective);
    assert!(best - fit.objective <= 1e-3, "solver {} far below grid {best}", fit.objective);
}

#[test]
fn logistic_lasso_matches_grid_in_two_dims() {
    let sys = random_system(2, 9, 5);
    let mut rng = rng_from_seed(6);
    let y: Vec<f64> = (0..9).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let problem = LassoProblem::new(LossModel::Logistic, &sys, &y).unwrap();
    let lambda = 0.02;
    let fit = problem.solve(lambda, 1e-9, None).unwrap();
    let mut best = f64::INFINITY;
    let steps = 2000;
    for a in 0..=steps {
        for b in 0..=steps {
            let t = [-4.0 + 8.0 * a as f64 / steps as f64, -4.0 + 8.0 * b as f64 / steps as f64];
            best = best.min(problem.objective(&t, lambda));
        }
    }
    assert!(fit.objective <= best + 1e-9);
    assert!(best - fit.objective <= 1e-3);
}

#[test]
fn penalized_fit_matches_grid_in_two_dims() {
    let (sys, y) = lad_fixture(2, 8, 31);
    let (lambda_n, s) = (0.2, 0.5);
    let loss = LossModel::Absolute { half_width: 1.0 };
    let fit = solve_penalized(&loss, &sys, &y, lambda_n, s, LambdaGrid { ratio: 1.01, ..LambdaGrid::default() }, 1e-9).unwrap();
    let problem = LassoProblem::new(loss, &sys, &y).unwrap();
    let full = |t: &[f64]| problem.risk(t) + penalty(t[0].abs() + t[1].abs(), lambda_n, s).unwrap();
    let mut best = f64::INFINITY;
    let steps = 3000;
    for a in 0..=steps {
        for b in 0..=steps {
            let t = [-3.0 + 6.0 * a as f64 / steps as f64, -3.0 + 6.0 * b as f64 / steps as f64];
            best = best.min(full(&t));
        }
    }
    let theta: Vec<f64> = fit.theta_hat.0.clone();
    assert!((full(&theta) - fit.objective).abs() <= 1e-9 * (1.0 + fit.objective));
    assert!(fit.objective <= best + 1e-3, "fit {} vs grid {best}", fit.objective);
}

#[test]
fn loss_sup_matches_grid_in_two_dims() {
    let sys = random_system(2, 40, 41);
    let inst = SyntheticInstance::new(sys, CoefVector(vec![0.3, -0.2]), NoiseFamily::Uniform { half_width: 1.0 }, 3).unwrap();
    let process = LossProcess::new(&inst, LossModel::Absolute { half_width: 1.0 }).unwrap();
    let geo = Geometry::new(inst.system.gram());
    let (eps, radius) = (0.3, 0.5);
    for index in 0..3 {
        let y = process.data(9, index);
        let got = process.sup(&y, eps, radius, AscentOptions { restarts: 40, ..AscentOptions::default() }, 5).unwrap();
        let mut best = 0.0f64;
        let steps = 600;
        for a in 0..=steps {
            for b in 0..=steps {
                let d = [radius * (2.0 * a as f64 / steps as f64 - 1.0), radius * (2.0 * b as f64 / steps as f64 - 1.0)];
                if d[0].abs() + d[1].abs() <= radius && geo.ellipsoid_norm(&d) <= eps {
                    best = best.max(process.increment(&d, &y).abs());
                }
            }
        }
        assert!(got.value <= best + 1e-3, "ascent {} exceeds grid {best}", got.value);
        assert!(best - got.value <= 1e-3 * (1.0 + best), "ascent {} vs grid {best}", got.value);
    }
}
