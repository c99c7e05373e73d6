//! Convexity trick: pull `f̂` toward `f*` until both distances fit the regime.

use serde::Serialize;

use crate::design::empirical_norm;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shrunk<T> {
    pub t: T,
    pub f_tilde: Vec<T>,
    /// `‖f̃ − f*‖_n`
    pub norm_tilde: T,
    /// `I(θ̃ − θ*) = t·I(θ̂ − θ*)`
    pub l1_tilde: T,
}

/// `t = (1 + ‖f̂ − f*‖_n/ε + I_diff/M)^{−1}` and `f̃ = t·f̂ + (1−t)·f*`.
pub fn shrink_toward<T: Real>(f_hat: &[T], f_star: &[T], i_diff: T, eps: T, radius: T) -> Result<Shrunk<T>> {
    if f_hat.len() != f_star.len() {
        return Err(Error::DimensionMismatch { expected: f_star.len(), got: f_hat.len() });
    }
    if !(eps > T::zero() && radius > T::zero()) {
        return Err(invalid("shrinking needs eps > 0 and M > 0"));
    }
    if !(i_diff >= T::zero()) {
        return Err(invalid("l1 distance must be nonnegative"));
    }
    let diff: Vec<T> = f_hat.iter().zip(f_star).map(|(&a, &b)| a - b).collect();
    let norm = empirical_norm(&diff)?;
    let t = T::one() / (T::one() + norm / eps + i_diff / radius);
    let f_tilde = f_hat.iter().zip(f_star).map(|(&a, &b)| t * a + (T::one() - t) * b).collect();
    Ok(Shrunk { t, f_tilde, norm_tilde: t * norm, l1_tilde: t * i_diff })
}

/// Checks that `‖f̃ − f*‖_n ≤ ε/3` and `I(f̃ − f*) ≤ M/3` force
/// `‖f̂ − f*‖_n ≤ ε` and `I(f̂ − f*) ≤ M`. Returns `false` on a counterexample.
pub fn shrinking_implication<T: Real>(norm_hat: T, i_diff: T, shrunk: &Shrunk<T>, eps: T, radius: T) -> bool {
    let three = T::lit(3.0);
    // guards against rounding at the boundary
    let slack = T::one() + T::lit(64.0) * T::epsilon();
    let premise = shrunk.norm_tilde <= eps / three && shrunk.l1_tilde <= radius / three;
    !premise || (norm_hat <= eps * slack && i_diff <= radius * slack)
}
