//! Rate of `ε_n` in `n` at fixed `m`, and the matching Monte Carlo slope of
//! the median estimation error.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::coverage::TrialOptions;
use super::params::{compute_bound_parameters, BoundParameters, Lambda0};
use crate::design::{empirical_norm, SyntheticInstance};
use crate::error::{invalid, Error, Result};
use crate::estimator::{solve_penalized, LossModel};
use crate::mc::{ls_slope, median, replicate};
use crate::scalar::Real;

/// `−1/(2(2−s))`, the exponent of `n` in `ε_n` on its power branch.
pub fn analytic_rate_exponent(s: f64) -> f64 {
    -1.0 / (2.0 * (2.0 - s))
}

/// Fixture for the rate study: `λ_{n,0} = κ·√(log(12m)/n)` with constant `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSpec {
    pub s: f64,
    pub m: usize,
    pub c: f64,
    pub i_star: f64,
    pub sigma_sq: f64,
    pub kappa: f64,
}

impl RateSpec {
    pub fn lambda0(&self, n: usize) -> f64 {
        self.kappa * ((12.0 * self.m as f64).ln() / n as f64).sqrt()
    }

    pub fn params(&self, n: usize) -> Result<BoundParameters> {
        let sig = self.sigma_sq;
        compute_bound_parameters(self.s, 1.0, self.m, n, self.c, self.i_star, |_| Ok(sig), Lambda0::Given(self.lambda0(n)))
    }
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 4 {
        return Err(invalid(format!("rate grid needs at least 4 sample sizes, got {}", n_grid.len())));
    }
    let lo = *n_grid.iter().min().expect("nonempty");
    let hi = *n_grid.iter().max().expect("nonempty");
    if lo == 0 || (hi as f64) < 10.0 * lo as f64 {
        return Err(invalid(format!("rate grid must span at least one decade, got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Least-squares slope of `log ε_n` on `log n`.
pub fn analytic_slope(spec: &RateSpec, n_grid: &[usize]) -> Result<f64> {
    check_grid(n_grid)?;
    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys = n_grid.iter().map(|&n| spec.params(n).map(|p| p.eps_n.ln())).collect::<Result<Vec<_>>>()?;
    ls_slope(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub median_error: f64,
    pub eps_n: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub spec: RateSpec,
    pub replications: usize,
    pub rows: Vec<RateRow>,
    pub observed_slope: f64,
    pub analytic_slope: f64,
    pub exponent: f64,
}

impl RateReport {
    /// CSV with columns `n,median_error,eps_n`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "median_error", "eps_n"])?;
        for r in &self.rows {
            wr.write_record([r.n.to_string(), r.median_error.to_string(), r.eps_n.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Static log-log plot of both series.
    pub fn svg(&self) -> String {
        let (w, h, pad) = (480.0, 320.0, 48.0);
        let pts: Vec<(f64, f64, f64)> =
            self.rows.iter().map(|r| ((r.n as f64).log10(), r.median_error.log10(), r.eps_n.log10())).collect();
        let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let ys = pts.iter().flat_map(|p| [p.1, p.2]).filter(|v| v.is_finite());
        let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let sx = |x: f64| pad + (x - xmin) / (xmax - xmin).max(1e-12) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin).max(1e-12) * (h - 2.0 * pad);
        let line = |pick: fn(&(f64, f64, f64)) -> f64| {
            pts.iter()
                .filter(|p| pick(p).is_finite())
                .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(pick(p))))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<path d="M{pad},{} H{} M{pad},{} V{}" stroke="black" fill="none"/>"#,
            h - pad,
            w - pad,
            h - pad,
            pad
        );
        let _ = writeln!(out, r#"<polyline points="{}" stroke="steelblue" fill="none"/>"#, line(|p| p.1));
        let _ = writeln!(out, r#"<polyline points="{}" stroke="firebrick" fill="none" stroke-dasharray="4 3"/>"#, line(|p| p.2));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">log10 n</text>"#, w / 2.0, h - 12.0);
        let _ = writeln!(
            out,
            r#"<text x="{pad}" y="20">median error (slope {:.3}), eps_n (dashed, slope {:.3})</text>"#,
            self.observed_slope, self.analytic_slope
        );
        out.push_str("</svg>\n");
        out
    }
}

/// For each `n`, builds an instance with `build(n)` and fits `reps` replications
/// with `λ_n = c·σ^s·λ_{n,0}(n)`; reports the slope of the log median error.
pub fn rate_study<T, B>(spec: &RateSpec, n_grid: &[usize], reps: usize, build: B, opts: TrialOptions) -> Result<RateReport>
where
    T: Real,
    B: Fn(usize) -> Result<(SyntheticInstance<T>, LossModel)>,
{
    check_grid(n_grid)?;
    if reps == 0 {
        return Err(invalid("rate study needs at least one replication"));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let params = spec.params(n)?;
        let (instance, loss) = build(n)?;
        if instance.system.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: instance.system.n() });
        }
        let f_star = instance.f_star();
        let errs = replicate(reps, |i| -> Result<f64> {
            let y = instance.generate(i as u64);
            let fit = solve_penalized(&loss, &instance.system, &y, params.lambda_n, spec.s, opts.grid, opts.tol)?;
            let f_hat = instance.system.evaluate(&fit.theta_hat)?;
            let diff: Vec<T> = f_hat.iter().zip(&f_star).map(|(&a, &b)| a - b).collect();
            Ok(empirical_norm(&diff)?.f64())
        });
        let ok: Vec<f64> = errs.iter().filter_map(|e| e.as_ref().ok().copied()).collect();
        if ok.is_empty() {
            return Err(Error::NonConvergence(format!("every fit failed at n = {n}")));
        }
        rows.push(RateRow { n, median_error: median(&ok), eps_n: params.eps_n, failures: reps - ok.len() });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_error.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(RateReport {
        spec: *spec,
        replications: reps,
        observed_slope: ls_slope(&xs, &ys)?,
        analytic_slope: analytic_slope(spec, n_grid)?,
        exponent: analytic_rate_exponent(spec.s),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents() {
        assert!((analytic_rate_exponent(0.5) + 1.0 / 3.0).abs() < 1e-15);
        assert!((analytic_rate_exponent(0.8) + 1.0 / 2.4).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let spec = RateSpec { s: 0.5, m: 16, c: 3.0, i_star: 1.0, sigma_sq: 1.0, kappa: 0.5 };
        assert!(analytic_slope(&spec, &[128, 256, 512]).is_err());
        assert!(analytic_slope(&spec, &[128, 256, 512, 1000]).is_err());
        assert!(analytic_slope(&spec, &[128, 256, 512, 1024, 2048]).is_ok());
    }
}
