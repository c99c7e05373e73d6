//! The penalty `λ^{2/(2−s)} I^{2(1−s)/(2−s)}` and its variational form
//! `min_λ (λI + C λ^{−p})`, `p = 2(1−s)/s`.

use crate::error::{invalid, Result};

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("smoothness s must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// `p = 2(1−s)/s`
pub fn variational_exponent(s: f64) -> f64 {
    2.0 * (1.0 - s) / s
}

pub fn penalty(i: f64, lambda_n: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    if !(lambda_n > 0.0) {
        return Err(invalid(format!("lambda_n must be positive, got {lambda_n}")));
    }
    if !(i >= 0.0) {
        return Err(invalid(format!("l1 norm must be nonnegative, got {i}")));
    }
    Ok(lambda_n.powf(2.0 / (2.0 - s)) * i.powf(2.0 * (1.0 - s) / (2.0 - s)))
}

/// `C = λ_n^{2/s} p^p / (p+1)^{p+1}`
pub fn variational_constant(lambda_n: f64, s: f64) -> Result<f64> {
    check_s(s)?;
    let p = variational_exponent(s);
    Ok(lambda_n.powf(2.0 / s) * p.powf(p) / (p + 1.0).powf(p + 1.0))
}

/// Minimizer `λ*(I) = (pC/I)^{1/(p+1)}` of `λI + Cλ^{−p}`.
pub fn optimal_lambda(i: f64, lambda_n: f64, s: f64) -> Result<f64> {
    let c = variational_constant(lambda_n, s)?;
    let p = variational_exponent(s);
    if !(i > 0.0) {
        return Err(invalid("optimal lambda needs I > 0"));
    }
    Ok((p * c / i).powf(1.0 / (p + 1.0)))
}

/// `C λ^{−p}`, the term added to the inner Lasso objective.
pub fn variational_offset(lambda: f64, c: f64, s: f64) -> f64 {
    c * lambda.powf(-variational_exponent(s))
}
