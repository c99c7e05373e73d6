//! Constants of the oracle inequality: `M_n`, `σ_n²`, `ε_n`, `λ_n`, the success
//! probability and the regime condition linking them.

use serde::Serialize;

use crate::epl::lambda_n0;
use crate::error::{invalid, Result};

/// Where `λ_{n,0}` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Lambda0 {
    /// `80·√(1+4A)·√(log(12m)/n)`
    Explicit,
    /// Caller-supplied, e.g. a Monte Carlo calibration.
    Given(f64),
}

/// Which of the two expressions defines `ε_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsBranch {
    Power,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundParameters {
    pub s: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub i_star: f64,
    pub lambda_source: Lambda0,
    pub lambda_n0: f64,
    #[serde(rename = "M_n")]
    pub m_n: f64,
    pub sigma_n_sq: f64,
    pub eps_n: f64,
    pub eps_branch: EpsBranch,
    pub lambda_n: f64,
    /// `n·λ_{n,0}^{2/(2−s)}·c^{2/(2−s)}·I*^{2(1−s)/(2−s)} / (27·σ_n^{4(1−s)/(2−s)})`
    pub success_exponent: f64,
    pub success_prob: f64,
    pub regime_value: f64,
    /// `(m/8)^{2−s}`
    pub regime_upper: f64,
    pub regime_ok: bool,
}

/// Evaluates every constant. `sigma_sq` is the certified margin function
/// `M ↦ σ²(M)`, evaluated at `M_n`.
pub fn compute_bound_parameters<F>(
    s: f64,
    a: f64,
    m: usize,
    n: usize,
    c: f64,
    i_star: f64,
    sigma_sq: F,
    lambda_source: Lambda0,
) -> Result<BoundParameters>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("s must lie in (0,1), got {s}")));
    }
    if !(c >= 3.0) {
        return Err(invalid(format!("c must be at least 3, got {c}")));
    }
    if !(i_star > 0.0 && i_star.is_finite()) {
        return Err(invalid(format!("I_star must be positive, got {i_star}")));
    }
    if n == 0 || m == 0 {
        return Err(invalid("need m >= 1 and n >= 1"));
    }
    let l0 = match lambda_source {
        Lambda0::Explicit => lambda_n0(a, m, n)?,
        Lambda0::Given(v) if v > 0.0 && v.is_finite() => v,
        Lambda0::Given(v) => return Err(invalid(format!("lambda_n0 must be positive, got {v}"))),
    };
    let q = 2.0 - s;
    let r = 1.0 - s;
    let m_n = 2f64.powf(q / (2.0 * r)) * 27f64.powf(-s / (2.0 * r)) * c.powf(1.0 / r) * i_star;
    let sig2 = sigma_sq(m_n)?;
    if !(sig2 > 0.0 && sig2.is_finite()) {
        return Err(invalid(format!("sigma^2(M_n) must be positive, got {sig2}")));
    }
    let sig = sig2.sqrt();
    let power = 54f64.sqrt() * sig.powf(2.0 / q) * c.powf(1.0 / q) * l0.powf(1.0 / q) * i_star.powf(r / q);
    let linear = 27.0 * sig2 * l0;
    let (eps_n, eps_branch) = if power >= linear { (power, EpsBranch::Power) } else { (linear, EpsBranch::Linear) };
    let success_exponent =
        n as f64 * l0.powf(2.0 / q) * c.powf(2.0 / q) * i_star.powf(2.0 * r / q) / (27.0 * sig.powf(4.0 * r / q));
    let regime_value = 13.5f64.powf(-q / (2.0 * r)) * c.powf(1.0 / r) * i_star / (sig2 * l0);
    let regime_upper = (m as f64 / 8.0).powf(q);
    Ok(BoundParameters {
        s,
        a,
        m,
        n,
        c,
        i_star,
        lambda_source,
        lambda_n0: l0,
        m_n,
        sigma_n_sq: sig2,
        eps_n,
        eps_branch,
        lambda_n: c * sig.powf(s) * l0,
        success_exponent,
        success_prob: -(-success_exponent).exp_m1(),
        regime_value,
        regime_upper,
        regime_ok: (1.0..=regime_upper).contains(&regime_value),
    })
}

impl BoundParameters {
    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    /// `ε_n²/(27σ_n²)`, the common right-hand side of both identities.
    pub fn quadratic_term(&self) -> f64 {
        self.eps_n * self.eps_n / (27.0 * self.sigma_n_sq)
    }

    /// Relative gap in `λ_{n,0}·ε_n^s·M_n^{1−s} = ε_n²/(27σ_n²)`.
    pub fn identity_threshold_residual(&self) -> f64 {
        let lhs = self.lambda_n0 * self.eps_n.powf(self.s) * self.m_n.powf(1.0 - self.s);
        Self::rel(lhs, self.quadratic_term())
    }

    /// Relative gap in `27^{s/(2−s)}·c^{−2/(2−s)}·λ_n^{2/(2−s)}·M_n^{2(1−s)/(2−s)} = ε_n²/(27σ_n²)`.
    pub fn identity_penalty_residual(&self) -> f64 {
        let q = 2.0 - self.s;
        let lhs = 27f64.powf(self.s / q)
            * self.c.powf(-2.0 / q)
            * self.lambda_n.powf(2.0 / q)
            * self.m_n.powf(2.0 * (1.0 - self.s) / q);
        Self::rel(lhs, self.quadratic_term())
    }

    pub fn eps_over_m(&self) -> f64 {
        self.eps_n / self.m_n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(l0: f64) -> BoundParameters {
        compute_bound_parameters(0.5, 1.0, 32, 10_000, 3.0, 1.0, |_| Ok(1.0), Lambda0::Given(l0)).unwrap()
    }

    #[test]
    fn reference_values() {
        let p = fixture(0.05);
        assert!((p.m_n - 2f64.powf(1.5) / 27f64.sqrt() * 9.0).abs() < 1e-12);
        assert!((p.m_n - 4.899).abs() < 1e-3);
        assert!((p.eps_n - 2.0746).abs() < 1e-3);
        assert_eq!(p.eps_branch, EpsBranch::Power);
        assert!((p.regime_value - 180.0 / 13.5f64.powf(1.5)).abs() < 1e-12);
        assert!((p.regime_value - 3.63).abs() < 5e-3);
        assert!((p.success_exponent - 29.5).abs() < 0.05);
        assert!((p.lambda_n - 0.15).abs() < 1e-15);
        assert!(p.identity_threshold_residual() < 1e-9);
        assert!(p.identity_penalty_residual() < 1e-9);
    }

    #[test]
    fn regime_needs_nineteen_functions() {
        let ok = |m| {
            compute_bound_parameters(0.5, 1.0, m, 10_000, 3.0, 1.0, |_| Ok(1.0), Lambda0::Given(0.05)).unwrap().regime_ok
        };
        assert!(!ok(18));
        assert!(ok(19));
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = |s, c, i| compute_bound_parameters(s, 1.0, 8, 100, c, i, |_| Ok(1.0), Lambda0::Given(0.1));
        assert!(f(0.5, 2.9, 1.0).is_err());
        assert!(f(1.0, 3.0, 1.0).is_err());
        assert!(f(0.0, 3.0, 1.0).is_err());
        assert!(f(0.5, 3.0, 0.0).is_err());
        assert!(compute_bound_parameters(0.5, 1.0, 8, 100, 3.0, 1.0, |_| Ok(1.0), Lambda0::Given(-1.0)).is_err());
    }

    #[test]
    fn linear_branch_for_large_lambda() {
        let p = fixture(5.0);
        assert_eq!(p.eps_branch, EpsBranch::Linear);
        assert!((p.eps_n - 135.0).abs() < 1e-12);
    }
}
