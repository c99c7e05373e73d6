//! One function per subcommand. Each validates its keys, computes, writes
//! artifacts, and returns whether its checks passed.

use std::fs::File;
use std::io::BufReader;

use serde::Serialize;

use l1bound::covering::{covering_report_with, partition_cells, CoveringReport, DistanceTable, ExponentChoice};
use l1bound::design::{build_tv_system, CoefVector, FunctionSystem, SyntheticInstance};
use l1bound::epl::{
    mc_max_finite_class, symmetrization_check, tail_check, write_increment_csv, AscentOptions, BaseProcess,
    LossProcess,
};
use l1bound::estimator::{solve_penalized, LambdaGrid};
use l1bound::maurey::{approximation_study, build_plan, cell_error_mc, combinatorial_budget, PlanSummary};
use l1bound::verify::{
    analytic_rate_exponent, compute_bound_parameters, coverage_study, rate_study, Lambda0, RateSpec, TrialOptions,
};

use crate::config::{at_least, positive, positive_grid, require, violated, ExperimentConfig};
use crate::error::CliError;
use crate::output::Artifacts;

pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub svg: bool,
    pub out: &'a mut Artifacts,
}

fn system(cfg: &ExperimentConfig, cmd: &str) -> Result<FunctionSystem<f64>, CliError> {
    match (&cfg.system_csv, cfg.n, cfg.m) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            Err(violated("give either `system_csv` or the TV sizes `n` and `m`, not both"))
        }
        (Some(path), None, None) => {
            let f = File::open(path).map_err(|e| violated(format!("cannot open `system_csv` {path}: {e}")))?;
            Ok(FunctionSystem::read_csv(BufReader::new(f))?)
        }
        _ => {
            let n = at_least("n", require(&cfg.n, "n", cmd)?, 1)?;
            let m = at_least("m", require(&cfg.m, "m", cmd)?, 1)?;
            Ok(build_tv_system(n, m)?)
        }
    }
}

fn exponent(cfg: &ExperimentConfig) -> Result<ExponentChoice<f64>, CliError> {
    match cfg.v {
        Some(v) => Ok(ExponentChoice::Given(positive("v", v)?)),
        None => Ok(ExponentChoice::Fitted),
    }
}

fn covering_of(cfg: &ExperimentConfig, table: &DistanceTable<f64>) -> Result<CoveringReport<f64>, CliError> {
    if let Some(g) = &cfg.eps_grid {
        positive_grid("eps_grid", g)?;
    }
    Ok(covering_report_with(table, cfg.eps_grid.clone(), exponent(cfg)?)?)
}

/// `(A, s)` from the keys, falling back to the covering fit.
fn envelope(cfg: &ExperimentConfig, system: &FunctionSystem<f64>) -> Result<(f64, f64), CliError> {
    if let Some(a) = cfg.a {
        if !(a >= 1.0) {
            return Err(violated(format!("`a` must be at least 1, got {a}")));
        }
    }
    let s = cfg.smoothness()?;
    if let (Some(a), Some(s)) = (cfg.a, s) {
        return Ok((a, s));
    }
    let table = DistanceTable::new(system);
    // the covering grid is not the experiment grid here
    let rep = covering_report_with(&table, None, exponent(cfg)?)?;
    Ok((cfg.a.unwrap_or(rep.a), s.unwrap_or(rep.s)))
}

fn instance(cfg: &ExperimentConfig, system: FunctionSystem<f64>, seed: u64, cmd: &str) -> Result<SyntheticInstance<f64>, CliError> {
    let theta = require(&cfg.theta_star, "theta_star", cmd)?;
    if theta.len() != system.m() {
        return Err(violated(format!("`theta_star` needs {} entries, got {}", system.m(), theta.len())));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(violated("`theta_star` entries must be finite"));
    }
    Ok(SyntheticInstance::new(system, CoefVector(theta), cfg.noise(cmd)?, seed)?)
}

fn grid(cfg: &ExperimentConfig) -> Result<LambdaGrid, CliError> {
    let ratio = cfg.ratio.unwrap_or(LambdaGrid::default().ratio);
    if !(ratio > 1.0 && ratio <= 1.1) {
        return Err(violated(format!("`ratio` must lie in (1, 1.1], got {ratio}")));
    }
    Ok(LambdaGrid { ratio, ..LambdaGrid::default() })
}

fn csv_bytes<F>(header: &[&str], rows: F) -> Vec<u8>
where
    F: FnOnce(&mut Vec<Vec<String>>),
{
    let mut body = Vec::new();
    rows(&mut body);
    let mut out = header.join(",");
    out.push('\n');
    for r in body {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn covering(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let sys = system(ctx.cfg, "covering")?;
    let table = DistanceTable::new(&sys);
    let rep = covering_of(ctx.cfg, &table)?;
    let mut buf = Vec::new();
    rep.write_csv(&mut buf)?;
    ctx.out.write("covering.csv", &buf)?;
    ctx.out.write_json("covering.json", &rep)?;
    let pass = rep.eps_grid.iter().zip(&rep.counts).all(|(&e, &c)| c as f64 <= rep.envelope(e) * (1.0 + 1e-12));
    Ok(Outcome { pass, summary: format!("V = {}, A = {}, s = {}", rep.v, rep.a, rep.s) })
}

#[derive(Serialize)]
struct MaureyOut {
    plan: PlanSummary,
    k_plus_one: usize,
    pi_intermediate_log2: f64,
    study: l1bound::maurey::ApproximationStudy,
}

pub fn maurey(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg, "maurey")?;
    let eps = positive("eps", require(&cfg.eps, "eps", "maurey")?)?;
    let reps = cfg.reps_at_least("maurey", 2)?;
    let m = sys.m();
    let theta = match &cfg.theta {
        Some(t) if t.len() == m => CoefVector(t.clone()),
        Some(t) => return Err(violated(format!("`theta` needs {m} entries, got {}", t.len()))),
        None => CoefVector(vec![1.0 / m as f64; m]),
    };
    let (a, s) = envelope(cfg, &sys)?;
    let table = DistanceTable::new(&sys);
    let partition = partition_cells(&table, eps.powf(s))?;
    let plan = build_plan(&theta, &partition, eps, s)?;
    let budget = combinatorial_budget(&plan, a, m)?;
    let study = approximation_study(&plan, &sys, &theta, reps, ctx.seed)?;
    let cells = cell_error_mc(&plan, &sys, reps, ctx.seed)?;
    let csv = csv_bytes(&["cell", "size", "alpha", "n_j", "mc_mean", "mc_se"], |rows| {
        for (j, ((c, ms), (&al, &nj))) in plan.partition.cells.iter().zip(&cells).zip(plan.alpha.iter().zip(&plan.draws)).enumerate() {
            rows.push(vec![
                j.to_string(),
                c.len().to_string(),
                al.to_string(),
                nj.to_string(),
                ms.mean.to_string(),
                ms.se.to_string(),
            ]);
        }
    });
    ctx.out.write("maurey_cells.csv", &csv)?;
    let out = MaureyOut {
        plan: PlanSummary::new(&plan, &budget),
        k_plus_one: budget.k + 1,
        pi_intermediate_log2: budget.pi_intermediate_log2,
        study,
    };
    ctx.out.write_json("maurey.json", &out)?;
    let pass = study.within_bound(3.0) && study.max_atoms <= budget.k + 1;
    Ok(Outcome {
        pass,
        summary: format!(
            "mean |f~ - f|^2 = {:.6} (se {:.2e}) vs 4 eps^2 = {}; atoms <= {} vs K+1 = {}",
            study.mc_mean,
            study.mc_se,
            study.bound,
            study.max_atoms,
            budget.k + 1
        ),
    })
}

#[derive(Serialize)]
struct EpsimOut {
    #[serde(rename = "A")]
    a: f64,
    s: f64,
    rows: Vec<l1bound::epl::IncrementEstimate>,
    /// `(eps, M)` pairs outside `eps/M > 8/m`.
    skipped: Vec<(f64, f64)>,
    finite_class: l1bound::epl::FiniteClassEstimate,
}

pub fn epsim(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg, "epsim")?;
    let eps_grid = require(&cfg.eps_grid, "eps_grid", "epsim")?;
    let radius_grid = require(&cfg.radius_grid, "radius_grid", "epsim")?;
    positive_grid("eps_grid", &eps_grid)?;
    positive_grid("radius_grid", &radius_grid)?;
    let reps = cfg.reps_at_least("epsim", 2)?;
    let tol = cfg.tol_or(1e-7)?;
    let (a, s) = envelope(cfg, &sys)?;
    let m = sys.m() as f64;
    let process = BaseProcess::new(&sys);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &eps in &eps_grid {
        for &radius in &radius_grid {
            if eps * m > 8.0 * radius {
                rows.push(process.mc_mean(eps, radius, reps, ctx.seed, a, s, tol)?);
            } else {
                skipped.push((eps, radius));
            }
        }
    }
    if rows.is_empty() {
        return Err(violated("no (eps, M) pair satisfies eps/M > 8/m"));
    }
    let failures: usize = rows.iter().map(|r| r.failures).sum();
    if failures > 0 {
        return Err(CliError::Solver(format!("{failures} supremum solves failed")));
    }
    let finite_class = mc_max_finite_class(&sys, reps, ctx.seed)?;
    let mut buf = Vec::new();
    write_increment_csv(&rows, &mut buf)?;
    ctx.out.write("epsim.csv", &buf)?;
    let worst = rows.iter().map(|r| r.ratio()).fold(0.0, f64::max);
    let pass = rows.iter().all(|r| r.within_bound(3.0)) && finite_class.passes();
    ctx.out.write_json("epsim.json", &EpsimOut { a, s, rows, skipped, finite_class })?;
    Ok(Outcome { pass, summary: format!("largest mc_mean/bound ratio {worst:.4}") })
}

pub fn tail(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg, "tail")?;
    let (a, s) = envelope(cfg, &sys)?;
    let inst = instance(cfg, sys, ctx.seed, "tail")?;
    let loss = cfg.loss_model("tail")?;
    let eps_grid = require(&cfg.eps_grid, "eps_grid", "tail")?;
    let sigma_grid = require(&cfg.sigma_grid, "sigma_grid", "tail")?;
    positive_grid("eps_grid", &eps_grid)?;
    positive_grid("sigma_grid", &sigma_grid)?;
    if eps_grid.len() != sigma_grid.len() {
        return Err(violated("`eps_grid` and `sigma_grid` must have the same length (they are paired)"));
    }
    let radius = positive("radius", require(&cfg.radius, "radius", "tail")?)?;
    let reps = cfg.reps_at_least("tail", 2)?;
    let defaults = AscentOptions::default();
    let opts = AscentOptions {
        restarts: cfg.restarts.unwrap_or(defaults.restarts),
        steps: at_least("steps", cfg.steps.unwrap_or(defaults.steps), 1)?,
        tol: cfg.tol_or(defaults.tol)?,
        ..defaults
    };
    let process = LossProcess::new(&inst, loss)?;
    let mut checks = Vec::new();
    for (&eps, &sigma) in eps_grid.iter().zip(&sigma_grid) {
        checks.push(tail_check(&process, eps, radius, sigma, a, s, reps, ctx.seed, opts)?);
    }
    let mut sym = Vec::new();
    let mut seen: Vec<f64> = Vec::new();
    for &eps in &eps_grid {
        if !seen.contains(&eps) {
            seen.push(eps);
            sym.push(symmetrization_check(&process, eps, radius, reps, ctx.seed, opts)?);
        }
    }
    let csv = csv_bytes(
        &["eps", "M", "sigma", "threshold", "tail_bound", "frequency", "binomial_se", "replications", "low_confidence", "pass"],
        |rows| {
            for c in &checks {
                rows.push(vec![
                    c.eps.to_string(),
                    c.radius.to_string(),
                    c.sigma.to_string(),
                    c.threshold.to_string(),
                    c.tail_bound.to_string(),
                    c.frequency.to_string(),
                    c.binomial_se.to_string(),
                    c.replications.to_string(),
                    c.low_confidence.to_string(),
                    (c.pass as u8).to_string(),
                ]);
            }
        },
    );
    ctx.out.write("tail.csv", &csv)?;
    let csv = csv_bytes(&["eps", "M", "loss_mean", "loss_se", "base_mean", "base_se", "replications", "pass"], |rows| {
        for c in &sym {
            rows.push(vec![
                c.eps.to_string(),
                c.radius.to_string(),
                c.loss_mean.to_string(),
                c.loss_se.to_string(),
                c.base_mean.to_string(),
                c.base_se.to_string(),
                c.replications.to_string(),
                (c.pass as u8).to_string(),
            ]);
        }
    });
    ctx.out.write("symmetrization.csv", &csv)?;
    let pass = checks.iter().all(|c| c.pass) && sym.iter().all(|c| c.pass);
    let worst = checks.iter().map(|c| c.frequency).fold(0.0, f64::max);
    Ok(Outcome { pass, summary: format!("largest exceedance frequency {worst}") })
}

#[derive(Serialize)]
struct SolveOut {
    fit: l1bound::estimator::FitResult<f64>,
    norm_error: f64,
    l1_error: f64,
}

pub fn solve(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg, "solve")?;
    let inst = instance(cfg, sys, ctx.seed, "solve")?;
    let loss = cfg.loss_model("solve")?;
    let lambda_n = positive("lambda_n", require(&cfg.lambda_n, "lambda_n", "solve")?)?;
    let s = cfg.smoothness()?.ok_or_else(|| violated("missing required key `s` for `solve`"))?;
    let grid = grid(cfg)?;
    let tol = cfg.tol_or(1e-6)?;
    let y = inst.generate(cfg.index.unwrap_or(0));
    let fit = solve_penalized(&loss, &inst.system, &y, lambda_n, s, grid, tol)?;
    let f_hat = inst.system.evaluate(&fit.theta_hat)?;
    let diff: Vec<f64> = f_hat.iter().zip(inst.f_star()).map(|(a, b)| a - b).collect();
    let norm_error = l1bound::design::empirical_norm(&diff)?;
    let l1_error = fit.theta_hat.sub(&inst.theta_star).ell1_norm();
    let csv = csv_bytes(&["lambda", "objective"], |rows| {
        for &(l, o) in &fit.lambda_path {
            rows.push(vec![l.to_string(), o.to_string()]);
        }
    });
    ctx.out.write("path.csv", &csv)?;
    let summary = format!("objective {} at inner lambda {}, |f^ - f*|_n = {norm_error}", fit.objective, fit.lambda);
    ctx.out.write_json("solve.json", &SolveOut { fit, norm_error, l1_error })?;
    Ok(Outcome { pass: true, summary })
}

pub fn verify(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let sys = system(cfg, "verify")?;
    let loss = cfg.loss_model("verify")?;
    let c = require(&cfg.c, "c", "verify")?;
    if !(c >= 3.0) {
        return Err(violated(format!("`c` must be at least 3, got {c}")));
    }
    let reps = cfg.reps_at_least("verify", 100)?;
    let grid = grid(cfg)?;
    let tol = cfg.tol_or(1e-6)?;
    let mode = cfg.lambda0_mode.clone().unwrap_or_else(|| "explicit".into());
    if cfg.lambda0.is_some() && mode != "given" {
        return Err(violated("`lambda0` is only read with `lambda0_mode = \"given\"`"));
    }
    let (a, s) = envelope(cfg, &sys)?;
    let inst = instance(cfg, sys, ctx.seed, "verify")?;
    let i_star = inst.theta_star.ell1_norm();
    if !(i_star > 0.0) {
        return Err(violated("`theta_star` must be nonzero (I_star > 0)"));
    }
    let source = match mode.as_str() {
        "explicit" => Lambda0::Explicit,
        "given" => Lambda0::Given(positive("lambda0", require(&cfg.lambda0, "lambda0", "verify")?)?),
        "calibrate" => {
            let creps = at_least("calibration_reps", cfg.calibration_reps.unwrap_or(200), 2)?;
            let points = at_least("calibration_points", cfg.calibration_points.unwrap_or(8), 2)?;
            let cal = l1bound::epl::calibrate_lambda0(&BaseProcess::new(&inst.system), s, points, creps, ctx.seed, 1e-9)?;
            ctx.out.write_json("calibration.json", &cal)?;
            Lambda0::Given(cal.lambda0)
        }
        other => {
            return Err(violated(format!("`lambda0_mode` must be \"explicit\", \"given\" or \"calibrate\", got {other:?}")))
        }
    };
    let sup_star = inst.f_star().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let params = compute_bound_parameters(
        s,
        a,
        inst.system.m(),
        inst.system.n(),
        c,
        i_star,
        |mm| loss.margin_sigma_sq(mm, sup_star),
        source,
    )?;
    let report = coverage_study(&inst, &loss, &params, reps, TrialOptions { grid, tol })?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    ctx.out.write("verify.csv", &buf)?;
    ctx.out.write_json("verify.json", &report)?;
    let summary = format!(
        "coverage |f^ - f*|_n <= eps_n: {}, I(theta^ - theta*) <= M_n: {}, required {:.6}, regime {:.4} in [1, {:.4}]{}{}",
        report.coverage_norm,
        report.coverage_l1,
        report.required_prob,
        params.regime_value,
        params.regime_upper,
        if report.vacuous_norm || report.vacuous_l1 { ", vacuous" } else { "" },
        if report.pass.is_none() { ", out of regime (not assessed)" } else { "" },
    );
    Ok(Outcome { pass: report.pass.unwrap_or(true), summary })
}

pub fn rate(ctx: &mut Context<'_>) -> Result<Outcome, CliError> {
    let cfg = ctx.cfg;
    let m = at_least("m", require(&cfg.m, "m", "rate")?, 2)?;
    if cfg.system_csv.is_some() || cfg.n.is_some() {
        return Err(violated("`rate` builds TV systems from `n_grid`; drop `n` and `system_csv`"));
    }
    let s = cfg.smoothness()?.ok_or_else(|| violated("missing required key `s` for `rate`"))?;
    let c = require(&cfg.c, "c", "rate")?;
    if !(c >= 3.0) {
        return Err(violated(format!("`c` must be at least 3, got {c}")));
    }
    let sigma_sq = positive("sigma_sq", require(&cfg.sigma_sq, "sigma_sq", "rate")?)?;
    let kappa = positive("kappa", require(&cfg.kappa, "kappa", "rate")?)?;
    let n_grid = require(&cfg.n_grid, "n_grid", "rate")?;
    let reps = cfg.reps_at_least("rate", 1)?;
    let loss = cfg.loss_model("rate")?;
    let theta = require(&cfg.theta_star, "theta_star", "rate")?;
    if theta.len() != m {
        return Err(violated(format!("`theta_star` needs {m} entries, got {}", theta.len())));
    }
    let i_star: f64 = theta.iter().map(|v| v.abs()).sum();
    if !(i_star > 0.0) {
        return Err(violated("`theta_star` must be nonzero (I_star > 0)"));
    }
    let opts = TrialOptions { grid: grid(cfg)?, tol: cfg.tol_or(1e-6)? };
    let spec = RateSpec { s, m, c, i_star, sigma_sq, kappa };
    let seed = ctx.seed;
    let noise = loss.noise();
    let report = rate_study(
        &spec,
        &n_grid,
        reps,
        |n| {
            let sys = build_tv_system::<f64>(n, m)?;
            let inst = SyntheticInstance::new(sys, CoefVector(theta.clone()), noise, l1bound::mc::derive_seed(seed, 0x7a7e, n as u64))?;
            Ok((inst, loss))
        },
        opts,
    )?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    ctx.out.write("rate.csv", &buf)?;
    ctx.out.write_json("rate.json", &report)?;
    if ctx.svg {
        ctx.out.write("rate.svg", report.svg().as_bytes())?;
    }
    let exponent = analytic_rate_exponent(s);
    let pass = report.observed_slope <= exponent + 0.1 && (report.analytic_slope - exponent).abs() <= 0.02;
    Ok(Outcome {
        pass,
        summary: format!(
            "observed slope {:.4}, analytic slope {:.4}, exponent {:.4}",
            report.observed_slope, report.analytic_slope, exponent
        ),
    })
}
