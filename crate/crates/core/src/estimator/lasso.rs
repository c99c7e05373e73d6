//! `min_θ (1/n) Σ γ(f_θ(x_i), Y_i) + λ I(θ)` for a fixed `λ`.
//!
//! Design points with identical base-function columns are pooled, so the cost
//! of a Newton step is linear in `n` plus a dense `m × m` solve.

use serde::Serialize;

use super::lad_ipm::{LadData, LadSolution};
use super::loss::{sigmoid, softplus, LossModel};
use crate::design::FunctionSystem;
use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, Serialize)]
pub struct LassoFit {
    pub theta: Vec<f64>,
    pub lambda: f64,
    /// `risk + λ·I(θ)`
    pub objective: f64,
    pub risk: f64,
    /// `‖g‖∞` for an explicit element `g` of the subdifferential at `θ`.
    pub residual: f64,
    pub iterations: usize,
}

/// Data pooled by distinct design column.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    pub loss: LossModel,
    m: usize,
    n: usize,
    columns: Vec<Vec<f64>>,
    members: Vec<Vec<usize>>,
    y: Vec<f64>,
}

impl LassoProblem {
    pub fn new<T: Real>(loss: LossModel, system: &FunctionSystem<T>, y: &[T]) -> Result<Self> {
        loss.validate()?;
        if y.len() != system.n() {
            return Err(Error::DimensionMismatch { expected: system.n(), got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("responses must be finite"));
        }
        if matches!(loss, LossModel::Logistic) && y.iter().any(|v| v.f64().abs() != 1.0) {
            return Err(invalid("logistic responses must be -1 or +1"));
        }
        let groups = system.design_groups();
        Ok(Self {
            loss,
            m: system.m(),
            n: system.n(),
            columns: groups.columns.iter().map(|c| c.iter().map(|v| v.f64()).collect()).collect(),
            members: groups.members,
            y: y.iter().map(|v| v.f64()).collect(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    fn group_values(&self, theta: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, theta)).collect()
    }

    pub fn risk(&self, theta: &[f64]) -> f64 {
        let f = self.group_values(theta);
        let mut total = 0.0;
        for (g, mem) in self.members.iter().enumerate() {
            for &i in mem {
                total += self.loss.gamma(f[g], self.y[i]);
            }
        }
        total / self.n as f64
    }

    pub fn objective(&self, theta: &[f64], lambda: f64) -> f64 {
        self.risk(theta) + lambda * theta.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Smallest `λ` for which `θ = 0` is certainly optimal: `‖(1/n) Σ x_i γ'(0, Y_i)‖∞`,
    /// with `sign(Y_i)` as the absolute-loss subgradient.
    pub fn lambda_max(&self) -> f64 {
        let mut g = vec![0.0; self.m];
        for (c, mem) in self.columns.iter().zip(&self.members) {
            let w: f64 = mem
                .iter()
                .map(|&i| match self.loss {
                    LossModel::Absolute { .. } => -self.y[i].signum(),
                    LossModel::Logistic => self.loss.dgamma(0.0, self.y[i]),
                })
                .sum();
            for (gk, ck) in g.iter_mut().zip(c) {
                *gk += w * ck;
            }
        }
        g.iter().fold(0.0f64, |a, v| a.max(v.abs())) / self.n as f64
    }

    pub fn solve(&self, lambda: f64, tol: f64, warm: Option<&[f64]>) -> Result<LassoFit> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        if !(tol > 0.0) {
            return Err(invalid("solver tolerance must be positive"));
        }
        match self.loss {
            LossModel::Absolute { .. } => self.solve_lad(lambda, tol),
            LossModel::Logistic => self.solve_logistic(lambda, tol, warm),
        }
    }

    /// Residual of the lasso optimality condition for smooth losses.
    fn smooth_residual(&self, theta: &[f64], grad: &[f64], lambda: f64) -> f64 {
        theta.iter().zip(grad).fold(0.0f64, |acc, (&t, &g)| {
            let r = if t != 0.0 { (g + lambda * t.signum()).abs() } else { (g.abs() - lambda).max(0.0) };
            acc.max(r)
        })
    }

    /// Exact LAD-lasso by the interior point in [`super::lad_ipm`]; the
    /// returned residual comes from an explicit subgradient built from the
    /// dual solution.
    fn solve_lad(&self, lambda: f64, tol: f64) -> Result<LassoFit> {
        let (m, n) = (self.m, self.n);
        let mut group_of = vec![0; n];
        for (k, mem) in self.members.iter().enumerate() {
            for &i in mem {
                group_of[i] = k;
            }
        }
        let data = LadData { columns: &self.columns, members: &self.members, group_of: &group_of, y: &self.y, m };
        let LadSolution { theta, u, iterations } = super::lad_ipm::solve(&data, lambda, tol)?;
        let pseudo = if lambda > 0.0 { m } else { 0 };
        let scale = 1.0 + self.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let fv = self.group_values(&theta);
        let at: Vec<f64> = group_of.iter().map(|&g| fv[g]).collect();
        // explicit subgradient: fix signs where residuals are clearly nonzero,
        // take the dual's values (clipped) on the interpolated points
        let eta = 1e-9 * scale;
        let mut sgn = vec![0.0; n];
        for i in 0..n {
            let r = self.y[i] - at[i];
            sgn[i] = if r.abs() > eta { r.signum() } else { (u[i] * n as f64).clamp(-1.0, 1.0) };
        }
        let mut g = vec![0.0; m];
        for (c, mem) in self.columns.iter().zip(&self.members) {
            let sv: f64 = mem.iter().map(|&i| sgn[i]).sum();
            for (gk, ck) in g.iter_mut().zip(c) {
                *gk -= sv * ck / n as f64;
            }
        }
        for k in 0..m {
            let tau = if theta[k].abs() > eta {
                theta[k].signum()
            } else if pseudo > 0 {
                (-u[n + k] / lambda).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            g[k] += lambda * tau;
        }
        let residual = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let risk = self.risk(&theta);
        Ok(LassoFit {
            objective: risk + lambda * theta.iter().map(|v| v.abs()).sum::<f64>(),
            theta,
            lambda,
            risk,
            residual,
            iterations,
        })
    }

    /// Proximal Newton: the quadratic model is minimized by coordinate descent,
    /// then a backtracking line search on the true objective.
    fn solve_logistic(&self, lambda: f64, tol: f64, warm: Option<&[f64]>) -> Result<LassoFit> {
        let m = self.m;
        let nn = self.n as f64;
        let counts: Vec<(f64, f64)> = self
            .members
            .iter()
            .map(|mem| {
                let pos = mem.iter().filter(|&&i| self.y[i] > 0.0).count() as f64;
                (pos, mem.len() as f64 - pos)
            })
            .collect();
        let risk = |theta: &[f64]| -> f64 {
            let f = self.group_values(theta);
            f.iter().zip(&counts).map(|(&a, &(p, q))| p * softplus(-a) + q * softplus(a)).sum::<f64>() / nn
        };
        let l1 = |theta: &[f64]| theta.iter().map(|v| v.abs()).sum::<f64>();
        let mut theta = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            _ => vec![0.0; m],
        };
        let mut iterations = 0;
        loop {
            iterations += 1;
            let f = self.group_values(&theta);
            let mut grad = vec![0.0; m];
            let mut hess = vec![0.0; m * m];
            for ((c, &fg), &(p, q)) in self.columns.iter().zip(&f).zip(&counts) {
                let sg = sigmoid(fg);
                let d1 = (-p * (1.0 - sg) + q * sg) / nn;
                let d2 = (p + q) * sg * (1.0 - sg) / nn;
                for a in 0..m {
                    if c[a] == 0.0 {
                        continue;
                    }
                    grad[a] += d1 * c[a];
                    for b in 0..m {
                        hess[a * m + b] += d2 * c[a] * c[b];
                    }
                }
            }
            let residual = self.smooth_residual(&theta, &grad, lambda);
            if residual <= tol {
                let r = risk(&theta);
                return Ok(LassoFit { objective: r + lambda * l1(&theta), risk: r, theta, lambda, residual, iterations });
            }
            if iterations > 200 {
                return Err(Error::NonConvergence(format!(
                    "logistic proximal Newton: residual {residual:e} above {tol:e} after 200 steps (lambda = {lambda})"
                )));
            }
            // coordinate descent on gᵀd + ½dᵀHd + λ‖θ + d‖₁ in β = θ + d
            let ridge = 1e-12;
            let mut beta = theta.clone();
            let mut hd = vec![0.0; m];
            for _sweep in 0..10_000 {
                let mut change = 0.0f64;
                for k in 0..m {
                    let hkk = hess[k * m + k] + ridge;
                    let gk = grad[k] + hd[k];
                    let zk = beta[k] - gk / hkk;
                    let thr = lambda / hkk;
                    let nb = zk.signum() * (zk.abs() - thr).max(0.0);
                    let delta = nb - beta[k];
                    if delta != 0.0 {
                        for a in 0..m {
                            hd[a] += hess[a * m + k] * delta;
                        }
                        beta[k] = nb;
                        change = change.max(delta.abs());
                    }
                }
                if change <= 1e-14 * (1.0 + l1(&beta)) {
                    break;
                }
            }
            let d: Vec<f64> = beta.iter().zip(&theta).map(|(b, t)| b - t).collect();
            let f0 = risk(&theta) + lambda * l1(&theta);
            let decrease = dot(&grad, &d) + lambda * (l1(&beta) - l1(&theta));
            if decrease >= 0.0 {
                // model cannot improve further; accept current point if residual is small at working precision
                let r = risk(&theta);
                if residual <= tol.max(1e-9) {
                    return Ok(LassoFit { objective: r + lambda * l1(&theta), risk: r, theta, lambda, residual, iterations });
                }
                return Err(Error::NonConvergence(format!(
                    "logistic proximal Newton stalled at residual {residual:e} (lambda = {lambda})"
                )));
            }
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = theta.iter().zip(&d).map(|(t, d)| t + alpha * d).collect();
                if risk(&cand) + lambda * l1(&cand) <= f0 + 0.25 * alpha * decrease || alpha < 1e-12 {
                    theta = cand;
                    break;
                }
                alpha *= 0.5;
            }
        }
    }
}

/// One-shot form of [`LassoProblem::solve`].
pub fn lasso_subproblem<T: Real>(
    loss: &LossModel,
    system: &FunctionSystem<T>,
    y: &[T],
    lambda: f64,
    tol: f64,
) -> Result<LassoFit> {
    LassoProblem::new(*loss, system, y)?.solve(lambda, tol, None)
}
