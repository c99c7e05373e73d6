//! The penalized estimator `argmin_θ risk(θ) + λ_n^{2/(2−s)} I(θ)^{2(1−s)/(2−s)}`.
//!
//! The penalty is concave in `I`, so the objective is not convex. Using
//! `pen(I) = min_λ (λI + Cλ^{−p})` the problem becomes a minimum over `λ` of
//! convex Lasso problems; we sweep a geometric `λ` grid and keep the best true
//! objective.

use serde::Serialize;

use super::lasso::LassoProblem;
use super::loss::LossModel;
use super::penalty::{optimal_lambda, penalty};
use crate::design::{CoefVector, FunctionSystem};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize)]
pub struct FitResult<T> {
    pub theta_hat: CoefVector<T>,
    /// `risk(θ̂) + pen(I(θ̂))`
    pub objective: f64,
    /// `(λ, risk + λ·I)` for every inner problem solved, in sweep order.
    pub lambda_path: Vec<(f64, f64)>,
    #[serde(rename = "residual")]
    pub subgradient_residual: f64,
    pub iterations: usize,
    /// Inner `λ` whose solution was selected.
    pub lambda: f64,
}

/// Geometric grid from `λ_max` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaGrid {
    /// Ratio of consecutive grid values, in `(1, 1.1]`.
    pub ratio: f64,
    /// Hard cap on the number of inner problems.
    pub max_points: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self { ratio: 1.05, max_points: 4000 }
    }
}

/// Sweeps `λ = λ_max, λ_max/r, …` until `λ` falls below `λ*(I_max)`, the
/// variational minimizer at the largest `I(θ)` seen. `I_max` starts from the
/// fit at `λ_max·1e−6`, the bottom of the sweep.
pub fn solve_penalized<T: Real>(
    loss: &LossModel,
    system: &FunctionSystem<T>,
    y: &[T],
    lambda_n: f64,
    s: f64,
    grid: LambdaGrid,
    tol: f64,
) -> Result<FitResult<T>> {
    let problem = LassoProblem::new(*loss, system, y)?;
    solve_penalized_problem(&problem, lambda_n, s, grid, tol)
}

pub fn solve_penalized_problem<T: Real>(
    problem: &LassoProblem,
    lambda_n: f64,
    s: f64,
    grid: LambdaGrid,
    tol: f64,
) -> Result<FitResult<T>> {
    if !(grid.ratio > 1.0 && grid.ratio <= 1.1) {
        return Err(invalid(format!("lambda grid ratio must lie in (1, 1.1], got {}", grid.ratio)));
    }
    // validates s and lambda_n
    penalty(0.0, lambda_n, s)?;
    let m = problem.m();
    let true_objective = |theta: &[f64]| -> Result<f64> {
        let i: f64 = theta.iter().map(|v| v.abs()).sum();
        Ok(problem.risk(theta) + penalty(i, lambda_n, s)?)
    };
    let zero = vec![0.0; m];
    let mut best = (true_objective(&zero)?, zero.clone(), 0.0, f64::INFINITY);
    let lambda_max = problem.lambda_max();
    let mut path = Vec::new();
    let mut iterations = 0;
    if lambda_max > 0.0 {
        let floor = lambda_max * 1e-6;
        // I(θ) at the bottom of the range bounds I along the path
        let low = problem
            .solve(floor, tol, None)
            .map_err(|e| Error::NonConvergence(format!("penalized sweep at lambda = {floor}: {e}")))?;
        iterations += low.iterations;
        let mut i_max: f64 = low.theta.iter().map(|v| v.abs()).sum();
        let mut lambda = lambda_max;
        let mut warm: Option<Vec<f64>> = None;
        loop {
            let fit = problem
                .solve(lambda, tol, warm.as_deref())
                .map_err(|e| Error::NonConvergence(format!("penalized sweep at lambda = {lambda}: {e}")))?;
            iterations += fit.iterations;
            path.push((lambda, fit.objective));
            let i: f64 = fit.theta.iter().map(|v| v.abs()).sum();
            i_max = i_max.max(i);
            let obj = true_objective(&fit.theta)?;
            if obj < best.0 {
                best = (obj, fit.theta.clone(), lambda, fit.residual);
            }
            warm = Some(fit.theta);
            let stop = i_max > 0.0 && lambda < optimal_lambda(i_max, lambda_n, s)?;
            if stop || lambda <= floor {
                break;
            }
            if path.len() >= grid.max_points {
                return Err(Error::NonConvergence(format!(
                    "penalized sweep reached {} grid points before covering lambda*(I_max)",
                    grid.max_points
                )));
            }
            lambda = (lambda / grid.ratio).max(floor);
        }
        let obj = true_objective(&low.theta)?;
        if obj < best.0 {
            best = (obj, low.theta, floor, low.residual);
        }
    }
    let (objective, theta, lambda, residual) = best;
    let residual = if residual.is_finite() { residual } else { 0.0 };
    Ok(FitResult {
        theta_hat: CoefVector(theta.iter().map(|&v| T::lit(v)).collect()),
        objective,
        lambda_path: path,
        subgradient_residual: residual,
        iterations,
        lambda,
    })
}
