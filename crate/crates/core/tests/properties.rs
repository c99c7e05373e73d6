//! Invariants as property tests.

use proptest::prelude::*;

use l1bound::covering::{greedy_net, DistanceTable};
use l1bound::design::{build_tv_system, empirical_norm, CoefVector, FunctionSystem, NoiseFamily, SyntheticInstance};
use l1bound::epl::{draw_xi, exact_mean_max_abs, mc_max_finite_class, project_l1, sup_base_process, FeasibleSet, Geometry};
use l1bound::estimator::{penalty, population_risk, variational_constant, variational_exponent, LossModel};
use l1bound::mc::rng_from_seed;
use l1bound::verify::{compute_bound_parameters, shrinking_implication, shrink_toward, EpsBranch, Lambda0};
use rand::Rng;

fn small_system(m: usize, n: usize, seed: u64) -> FunctionSystem<f64> {
    let mut rng = rng_from_seed(seed);
    let rows = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    FunctionSystem::from_rows(rows).unwrap()
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (hi - r * (hi - lo), lo + r * (hi - lo));
    for _ in 0..300 {
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
        a = hi - r * (hi - lo);
        b = lo + r * (hi - lo);
    }
    f(0.5 * (lo + hi))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn sup_is_monotone_and_scale_equivariant(seed in 0u64..1000, m in 2usize..6, eps in 0.05f64..1.0, radius in 0.05f64..1.5, c in 0.2f64..5.0) {
        let sys = small_system(m, 12, seed);
        let geo = Geometry::new(sys.gram());
        let xi = draw_xi(&sys, seed).xi;
        let tol = 1e-9;
        let base = sup_base_process(&geo, &xi, eps, radius, tol).unwrap().value;
        let wider = sup_base_process(&geo, &xi, eps * 1.3, radius, tol).unwrap().value;
        let bigger = sup_base_process(&geo, &xi, eps, radius * 1.3, tol).unwrap().value;
        prop_assert!(wider >= base - 2.0 * tol);
        prop_assert!(bigger >= base - 2.0 * tol);
        let scaled = sup_base_process(&geo, &xi, c * eps, c * radius, tol).unwrap().value;
        prop_assert!((scaled - c * base).abs() <= 4.0 * tol * (1.0 + c));
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let flipped = sup_base_process(&geo, &neg, eps, radius, tol).unwrap().value;
        prop_assert!((flipped - base).abs() <= 2.0 * tol);
    }

    #[test]
    fn sup_maximizer_is_feasible(seed in 0u64..1000, m in 1usize..6, eps in 0.05f64..1.0, radius in 0.05f64..1.5) {
        let sys = small_system(m, 10, seed);
        let geo = Geometry::new(sys.gram());
        let xi = draw_xi(&sys, seed + 1).xi;
        let sol = sup_base_process(&geo, &xi, eps, radius, 1e-9).unwrap();
        let set = FeasibleSet { geometry: &geo, eps, radius };
        prop_assert!(set.contains(&sol.theta, 1e-9));
        let attained: f64 = sol.theta.iter().zip(&xi).map(|(a, b)| a * b).sum();
        prop_assert!((attained.abs() - sol.value).abs() <= 1e-8);
        prop_assert!(sol.upper_bound >= sol.value);
    }

    #[test]
    fn projections_are_feasible_and_idempotent(seed in 0u64..1000, m in 1usize..7, eps in 0.05f64..1.0, radius in 0.05f64..1.5) {
        let sys = small_system(m, 10, seed);
        let geo = Geometry::new(sys.gram());
        let mut rng = rng_from_seed(seed + 2);
        let z: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = project_l1(&z, radius);
        prop_assert!(p.iter().map(|v| v.abs()).sum::<f64>() <= radius * (1.0 + 1e-12));
        let pp = project_l1(&p, radius);
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let set = FeasibleSet { geometry: &geo, eps, radius };
        let q = set.project(&z, 500, 1e-10);
        prop_assert!(set.contains(&q, 1e-9));
        let qq = set.project(&q, 500, 1e-10);
        for (a, b) in q.iter().zip(&qq) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn greedy_net_separates_and_covers(seed in 0u64..1000, m in 2usize..24, eps in 0.05f64..1.0) {
        let sys = small_system(m, 16, seed);
        let table = DistanceTable::new(&sys);
        let centers = greedy_net(&table, eps).unwrap();
        for (i, &a) in centers.iter().enumerate() {
            for &b in &centers[i + 1..] {
                prop_assert!(table.get(a, b) > eps);
            }
        }
        for k in 0..m {
            prop_assert!(centers.iter().any(|&c| table.get(k, c) <= eps));
        }
    }

    #[test]
    fn losses_are_convex_and_one_lipschitz(a in -6.0f64..6.0, b in -6.0f64..6.0, t in 0.0f64..1.0, y in -3.0f64..3.0, label in proptest::bool::ANY) {
        let lad = LossModel::Absolute { half_width: 1.0 };
        let yl = if label { 1.0 } else { -1.0 };
        for (loss, yy) in [(lad, y), (LossModel::Logistic, yl)] {
            prop_assert!((loss.gamma(a, yy) - loss.gamma(b, yy)).abs() <= (a - b).abs() * (1.0 + 1e-12) + 1e-15);
            let mid = loss.gamma(t * a + (1.0 - t) * b, yy);
            prop_assert!(mid <= t * loss.gamma(a, yy) + (1.0 - t) * loss.gamma(b, yy) + 1e-12);
        }
    }

    #[test]
    fn penalty_equals_its_variational_form(s in 0.15f64..0.9, lambda_n in 0.05f64..3.0, i in 0.01f64..20.0) {
        let c = variational_constant(lambda_n, s).unwrap();
        let p = variational_exponent(s);
        let direct = penalty(i, lambda_n, s).unwrap();
        // minimize over log λ for conditioning
        let best = golden_min(|u| { let l = u.exp(); l * i + c * l.powf(-p) }, -30.0, 30.0);
        prop_assert!((best - direct).abs() <= 1e-8 * (1.0 + direct));
    }

    #[test]
    fn oracle_identities_on_power_branch(s in 0.1f64..0.9, c in 3.0f64..10.0, i_star in 0.1f64..10.0, sigma_sq in 0.1f64..10.0, l0 in 1e-4f64..1.0, m in 2usize..200) {
        let p = compute_bound_parameters(s, 1.0, m, 1000, c, i_star, |_| Ok(sigma_sq), Lambda0::Given(l0)).unwrap();
        if p.eps_branch == EpsBranch::Power {
            prop_assert!(p.identity_threshold_residual() <= 1e-9);
            prop_assert!(p.identity_penalty_residual() <= 1e-9);
        }
        if p.regime_ok {
            prop_assert!(p.eps_over_m() <= 1.0 + 1e-12);
            prop_assert!(p.eps_over_m() >= 8.0 / m as f64 * (1.0 - 1e-12));
        }
        prop_assert!((0.0..=1.0).contains(&p.success_prob));
    }
}

#[test]
fn shrinking_implication_has_no_counterexample() {
    let mut rng = rng_from_seed(2024);
    let mut premises = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..12);
        let f_star: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let scale = 10f64.powf(rng.gen_range(-2.0..1.5));
        let f_hat: Vec<f64> = f_star.iter().map(|v| v + scale * rng.gen_range(-1.0..1.0)).collect();
        let i_diff = 10f64.powf(rng.gen_range(-2.0..1.5));
        let eps = 10f64.powf(rng.gen_range(-1.5..1.0));
        let radius = 10f64.powf(rng.gen_range(-1.5..1.0));
        let r = shrink_toward(&f_hat, &f_star, i_diff, eps, radius).unwrap();
        let diff: Vec<f64> = f_hat.iter().zip(&f_star).map(|(a, b)| a - b).collect();
        let norm_hat = empirical_norm(&diff).unwrap();
        assert!(r.norm_tilde < eps && r.l1_tilde < radius);
        assert!(shrinking_implication(norm_hat, i_diff, &r, eps, radius));
        let tilde: Vec<f64> = r.f_tilde.iter().zip(&f_star).map(|(a, b)| a - b).collect();
        assert!((empirical_norm(&tilde).unwrap() - r.norm_tilde).abs() <= 1e-12 * (1.0 + r.norm_tilde));
        if r.norm_tilde <= eps / 3.0 && r.l1_tilde <= radius / 3.0 {
            premises += 1;
        }
    }
    // the premise must actually be exercised
    assert!(premises > 1000, "only {premises} fixtures reached the premise");
}

#[test]
fn margin_condition_holds_on_random_targets() {
    let sys = build_tv_system::<f64>(64, 8).unwrap();
    let mut rng = rng_from_seed(77);
    for (loss, noise) in [
        (LossModel::Absolute { half_width: 1.0 }, NoiseFamily::Uniform { half_width: 1.0 }),
        (LossModel::Logistic, NoiseFamily::BernoulliLogit),
    ] {
        for radius in [0.5, 1.0, 2.0] {
            let theta_star: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let inst = SyntheticInstance::new(sys.clone(), CoefVector(theta_star.clone()), noise, 1).unwrap();
            let f_star = inst.f_star();
            let sup_star = f_star.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let sigma_sq = loss.margin_sigma_sq(radius, sup_star).unwrap();
            let base = population_risk(&loss, &sys, &theta_star, &theta_star).unwrap();
            for _ in 0..1000 {
                let dir: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let l1: f64 = dir.iter().map(|v| v.abs()).sum();
                let scale = radius * rng.gen::<f64>() / l1;
                let theta: Vec<f64> = theta_star.iter().zip(&dir).map(|(a, d)| a + scale * d).collect();
                let f = sys.evaluate_slice(&theta).unwrap();
                // TV rows are in [0,1], so the sup distance is at most the l1 distance
                assert!(f.iter().zip(&f_star).all(|(a, b)| (a - b).abs() <= radius + 1e-12));
                let excess = population_risk(&loss, &sys, &theta, &theta_star).unwrap() - base;
                let d: Vec<f64> = f.iter().zip(&f_star).map(|(a, b)| a - b).collect();
                let dist_sq = empirical_norm(&d).unwrap().powi(2);
                assert!(excess >= dist_sq / sigma_sq - 1e-12, "{loss:?}, M = {radius}: excess {excess} < {}", dist_sq / sigma_sq);
            }
        }
    }
}

#[test]
fn margin_constant_is_nondecreasing() {
    for loss in [LossModel::Absolute { half_width: 1.0 }, LossModel::Logistic] {
        let vals: Vec<f64> = (1..40).map(|k| loss.margin_sigma_sq(0.1 * k as f64, 0.5).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }
    assert_eq!(LossModel::Absolute { half_width: 1.0 }.margin_sigma_sq(0.5, 0.0).unwrap(), 2.0);
}

#[test]
fn xi_second_moment_matches_row_norms() {
    let sys = small_system(4, 30, 5);
    let reps = 10_000;
    let draws: Vec<Vec<f64>> = (0..reps).map(|r| draw_xi(&sys, r as u64).xi).collect();
    for k in 0..4 {
        let sq: Vec<f64> = draws.iter().map(|x| x[k] * x[k]).collect();
        let ms = l1bound::mc::mean_se(&sq).unwrap();
        let expected = sys.row_norm(k).powi(2) / 30.0;
        assert!((ms.mean - expected).abs() <= 4.0 * ms.se, "k = {k}: {} vs {expected}", ms.mean);
    }
}

#[test]
fn enumeration_agrees_with_monte_carlo() {
    let sys = small_system(5, 12, 9);
    let exact = exact_mean_max_abs(&sys).unwrap();
    let mc = mc_max_finite_class(&sys, 20_000, 3).unwrap();
    assert!((mc.mc_mean - exact).abs() <= 4.0 * mc.mc_se, "{} vs {exact}", mc.mc_mean);
    assert!(exact <= mc.bound);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    // with eps ≥ M·max‖ψ_k‖_n the ellipsoid never binds
    #[test]
    fn large_eps_reduces_to_l1_ball(seed in 0u64..1000, m in 1usize..6, radius in 0.05f64..1.5, slack in 1.0f64..3.0) {
        let sys = small_system(m, 10, seed);
        let geo = Geometry::new(sys.gram());
        let xi = draw_xi(&sys, seed + 7).xi;
        let max_norm = (0..m).map(|k| sys.row_norm(k)).fold(0.0f64, f64::max);
        let eps = slack * radius * max_norm;
        let sol = sup_base_process(&geo, &xi, eps, radius, 1e-10).unwrap();
        let expected = radius * xi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!((sol.value - expected).abs() <= 1e-8 * (1.0 + expected));
    }
}
