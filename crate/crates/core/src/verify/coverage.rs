//! Coverage of the oracle inequality: repeated fits on fresh responses,
//! counting how often both distances land inside `ε_n` and `M_n`.

use std::io::Write;

use serde::Serialize;

use super::params::BoundParameters;
use crate::design::{empirical_norm, SyntheticInstance};
use crate::error::{invalid, Result};
use crate::estimator::{penalty, solve_penalized, LambdaGrid, LossModel};
use crate::mc::{binomial_se, replicate};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum TrialStatus {
    Fitted,
    /// The regime condition fails; the trial was not run.
    OutOfRegime,
    SolverFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub index: u64,
    pub status: TrialStatus,
    pub norm_error: f64,
    pub l1_error: f64,
    pub norm_ok: Option<bool>,
    pub l1_ok: Option<bool>,
    pub objective: f64,
    pub lambda: f64,
}

impl TrialRecord {
    fn empty(index: u64, status: TrialStatus) -> Self {
        Self { index, status, norm_error: f64::NAN, l1_error: f64::NAN, norm_ok: None, l1_ok: None, objective: f64::NAN, lambda: f64::NAN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOptions {
    pub grid: LambdaGrid,
    pub tol: f64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { grid: LambdaGrid::default(), tol: 1e-6 }
    }
}

/// One fit on replication `index` of `instance`, with `λ_n` and `s` from `params`.
pub fn run_oracle_trial<T: Real>(
    instance: &SyntheticInstance<T>,
    loss: &LossModel,
    params: &BoundParameters,
    index: u64,
    opts: TrialOptions,
) -> TrialRecord {
    if !params.regime_ok {
        return TrialRecord::empty(index, TrialStatus::OutOfRegime);
    }
    let y = instance.generate(index);
    let fit = match solve_penalized(loss, &instance.system, &y, params.lambda_n, params.s, opts.grid, opts.tol) {
        Ok(f) => f,
        Err(e) => return TrialRecord::empty(index, TrialStatus::SolverFailure(e.to_string())),
    };
    let measured = (|| -> Result<(f64, f64)> {
        let f_hat = instance.system.evaluate(&fit.theta_hat)?;
        let diff: Vec<T> = f_hat.iter().zip(instance.f_star()).map(|(&a, b)| a - b).collect();
        Ok((empirical_norm(&diff)?.f64(), fit.theta_hat.sub(&instance.theta_star).ell1_norm().f64()))
    })();
    match measured {
        Ok((norm_error, l1_error)) => TrialRecord {
            index,
            status: TrialStatus::Fitted,
            norm_error,
            l1_error,
            norm_ok: Some(norm_error <= params.eps_n),
            l1_ok: Some(l1_error <= params.m_n),
            objective: fit.objective,
            lambda: fit.lambda,
        },
        Err(e) => TrialRecord::empty(index, TrialStatus::SolverFailure(e.to_string())),
    }
}

/// Largest `‖f̂ − f*‖_n` and `I(θ̂ − θ*)` any minimizer can have, from
/// `pen(I(θ̂)) ≤ risk(θ̂) + pen(I(θ̂)) ≤ risk(0)` and `‖f_θ‖_n ≤ I(θ)·max_k ‖ψ_k‖_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct APrioriBound {
    pub risk_at_zero: f64,
    pub l1_max: f64,
    pub norm_error_max: f64,
    pub l1_error_max: f64,
}

pub fn a_priori_bound<T: Real>(instance: &SyntheticInstance<T>, loss: &LossModel, params: &BoundParameters) -> Result<APrioriBound> {
    let f_star = instance.f_star();
    let sup_star = f_star.iter().fold(0.0f64, |a, v| a.max(v.f64().abs()));
    let risk_at_zero = match *loss {
        LossModel::Absolute { half_width } => sup_star + half_width,
        LossModel::Logistic => std::f64::consts::LN_2,
    };
    let unit = penalty(1.0, params.lambda_n, params.s)?;
    let expo = (2.0 - params.s) / (2.0 * (1.0 - params.s));
    let l1_max = (risk_at_zero / unit).powf(expo);
    let top = (0..instance.system.m()).fold(0.0f64, |a, k| a.max(instance.system.row_norm(k).f64()));
    let i_star = instance.theta_star.ell1_norm().f64();
    Ok(APrioriBound {
        risk_at_zero,
        l1_max,
        norm_error_max: l1_max * top + empirical_norm(&f_star)?.f64(),
        l1_error_max: l1_max + i_star,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub params: BoundParameters,
    pub replications: usize,
    pub in_regime: bool,
    pub coverage_norm: f64,
    pub coverage_l1: f64,
    pub required_prob: f64,
    /// Binomial standard error at `required_prob`.
    pub binomial_se: f64,
    pub solver_failures: usize,
    /// `ε_n` (resp. `M_n`) exceeds every error a minimizer can have.
    pub vacuous_norm: bool,
    pub vacuous_l1: bool,
    /// `None` when the regime condition fails: the bound says nothing there.
    pub pass: Option<bool>,
    pub records: Vec<TrialRecord>,
}

impl VerificationReport {
    /// Per-trial CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "status", "norm_error", "l1_error", "norm_ok", "l1_ok", "objective", "lambda"])?;
        let flag = |b: Option<bool>| b.map_or(String::new(), |v| (v as u8).to_string());
        for r in &self.records {
            let status = match &r.status {
                TrialStatus::Fitted => "fitted",
                TrialStatus::OutOfRegime => "out_of_regime",
                TrialStatus::SolverFailure(_) => "solver_failure",
            };
            wr.write_record([
                r.index.to_string(),
                status.to_string(),
                r.norm_error.to_string(),
                r.l1_error.to_string(),
                flag(r.norm_ok),
                flag(r.l1_ok),
                r.objective.to_string(),
                r.lambda.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs `reps ≥ 100` trials (indices `0..reps`). Solver failures count as
/// misses. Passes iff both coverages are at least `success_prob − 3·SE`.
pub fn coverage_study<T: Real>(
    instance: &SyntheticInstance<T>,
    loss: &LossModel,
    params: &BoundParameters,
    reps: usize,
    opts: TrialOptions,
) -> Result<VerificationReport> {
    if reps < 100 {
        return Err(invalid(format!("coverage study needs at least 100 replications, got {reps}")));
    }
    loss.validate()?;
    let records = replicate(reps, |i| run_oracle_trial(instance, loss, params, i as u64, opts));
    let frac = |pick: fn(&TrialRecord) -> Option<bool>| {
        records.iter().filter(|r| pick(r) == Some(true)).count() as f64 / reps as f64
    };
    let coverage_norm = frac(|r| r.norm_ok);
    let coverage_l1 = frac(|r| r.l1_ok);
    let solver_failures = records.iter().filter(|r| matches!(r.status, TrialStatus::SolverFailure(_))).count();
    let required_prob = params.success_prob;
    let se = binomial_se(required_prob, reps);
    let apriori = a_priori_bound(instance, loss, params)?;
    let pass = params
        .regime_ok
        .then_some(coverage_norm >= required_prob - 3.0 * se && coverage_l1 >= required_prob - 3.0 * se);
    Ok(VerificationReport {
        params: params.clone(),
        replications: reps,
        in_regime: params.regime_ok,
        coverage_norm,
        coverage_l1,
        required_prob,
        binomial_se: se,
        solver_failures,
        vacuous_norm: params.eps_n >= apriori.norm_error_max,
        vacuous_l1: params.m_n >= apriori.l1_error_max,
        pass,
        records,
    })
}
