//! Closed-form bounds the Monte Carlo estimates are compared against.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::scalar::Real;

fn ln_ratio<T: Real>(factor: usize, m: usize, n: usize) -> T {
    (T::from_count(factor * m).ln() / T::from_count(n)).sqrt()
}

/// `20·√(1+2A)·ε^s·√(log(6m)/n)`, for `ε ≥ 16/m`, `m ≥ 4`.
pub fn hull_increment_bound<T: Real>(eps: T, a: T, s: T, m: usize, n: usize) -> Result<T> {
    if m < 4 {
        return Err(domain(format!("need m >= 4, got m = {m}")));
    }
    if eps < T::lit(16.0) / T::from_count(m) {
        return Err(domain(format!("need eps >= 16/m = {}, got eps = {eps}", 16.0 / m as f64)));
    }
    if a < T::one() {
        return Err(domain(format!("need A >= 1, got A = {a}")));
    }
    if n == 0 {
        return Err(domain("need n >= 1"));
    }
    Ok(T::lit(20.0) * (T::one() + T::lit(2.0) * a).sqrt() * eps.powf(s) * ln_ratio::<T>(6, m, n))
}

/// `20·√(1+4A)·M^{1−s}·ε^s·√(log(12m)/n)`, for `ε/M > 8/m`, `m ≥ 2`.
pub fn increment_bound<T: Real>(eps: T, radius: T, a: T, s: T, m: usize, n: usize) -> Result<T> {
    if m < 2 {
        return Err(domain(format!("need m >= 2, got m = {m}")));
    }
    if !(eps > T::zero() && radius > T::zero()) {
        return Err(domain("need eps > 0 and M > 0"));
    }
    // compare ε·m > 8·M to keep the boundary case exact
    if !(eps * T::from_count(m) > T::lit(8.0) * radius) {
        return Err(domain(format!("need eps/M > 8/m, got eps/M = {} and 8/m = {}", eps / radius, 8.0 / m as f64)));
    }
    if a < T::one() {
        return Err(domain(format!("need A >= 1, got A = {a}")));
    }
    if n == 0 {
        return Err(domain("need n >= 1"));
    }
    Ok(T::lit(20.0)
        * (T::one() + T::lit(4.0) * a).sqrt()
        * radius.powf(T::one() - s)
        * eps.powf(s)
        * ln_ratio::<T>(12, m, n))
}

/// `λ_{n,0} = 80·√(1+4A)·√(log(12m)/n)`.
pub fn lambda_n0<T: Real>(a: T, m: usize, n: usize) -> Result<T> {
    if a < T::one() || m < 2 || n == 0 {
        return Err(domain(format!("lambda_n0 needs A >= 1, m >= 2, n >= 1 (got A = {a}, m = {m}, n = {n})")));
    }
    Ok(T::lit(80.0) * (T::one() + T::lit(4.0) * a).sqrt() * ln_ratio::<T>(12, m, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound<T> {
    pub threshold: T,
    pub tail_bound: T,
}

/// Threshold `λ_{n,0}·ε^s·M^{1−s} + ε²/(27σ²)` and the probability
/// `exp(−nε²/(2(27σ²)²))` of exceeding it.
pub fn threshold_and_tail<T: Real>(
    eps: T,
    radius: T,
    sigma: T,
    a: T,
    s: T,
    m: usize,
    n: usize,
) -> Result<TailBound<T>> {
    if !(sigma > T::zero()) {
        return Err(domain("need sigma > 0"));
    }
    // same preconditions as the expectation bound it rests on
    increment_bound(eps, radius, a, s, m, n)?;
    let l0 = lambda_n0(a, m, n)?;
    tail_from_lambda(l0, eps, radius, sigma, s, n)
}

/// Same as [`threshold_and_tail`] with a caller-supplied `λ_{n,0}`.
pub fn tail_from_lambda<T: Real>(lambda0: T, eps: T, radius: T, sigma: T, s: T, n: usize) -> Result<TailBound<T>> {
    if !(sigma > T::zero() && eps > T::zero() && radius > T::zero()) {
        return Err(domain("need eps, M, sigma > 0"));
    }
    let c = T::lit(27.0) * sigma * sigma;
    let threshold = lambda0 * eps.powf(s) * radius.powf(T::one() - s) + eps * eps / c;
    let tail_bound = (-T::from_count(n) * eps * eps / (T::lit(2.0) * c * c)).exp();
    Ok(TailBound { threshold, tail_bound })
}

/// `2L·√(log(3m)/n)`.
pub fn finite_class_bound<T: Real>(l: T, m: usize, n: usize) -> Result<T> {
    if !(l > T::zero()) || m == 0 || n == 0 {
        return Err(domain("maximal bound needs L > 0, m >= 1, n >= 1"));
    }
    Ok(T::lit(2.0) * l * ln_ratio::<T>(3, m, n))
}

/// Range constant for `ξ_k`: the summands `ψ_k(x_i)ε_i` live in
/// `[−|ψ_k(x_i)|, |ψ_k(x_i)|]`, so `L² = max_k (1/n)Σ_i (2ψ_k(x_i))² = 4·max_k ‖ψ_k‖_n²`.
pub fn rademacher_range_constant<T: Real>(system: &crate::design::FunctionSystem<T>) -> T {
    let top = (0..system.m()).fold(T::zero(), |a, k| a.max(system.row_norm(k)));
    T::lit(2.0) * top
}
