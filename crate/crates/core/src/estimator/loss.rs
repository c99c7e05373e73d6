//! Convex 1-Lipschitz losses with closed-form population risk.

use serde::{Deserialize, Serialize};

use crate::design::{FunctionSystem, NoiseFamily};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// `γ(a, y)` together with the noise law used for expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossModel {
    /// `|y − a|` with `Y = f* + Uniform(−b, b)`.
    Absolute { half_width: f64 },
    /// `log(1 + e^{−ya})` with `P(Y = 1) = 1/(1 + e^{−f*})`.
    Logistic,
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `1/(1 + e^{−x})`
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LossModel {
    pub fn from_noise(noise: NoiseFamily) -> Self {
        match noise {
            NoiseFamily::Uniform { half_width } => Self::Absolute { half_width },
            NoiseFamily::BernoulliLogit => Self::Logistic,
        }
    }

    pub fn noise(&self) -> NoiseFamily {
        match *self {
            Self::Absolute { half_width } => NoiseFamily::Uniform { half_width },
            Self::Logistic => NoiseFamily::BernoulliLogit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Absolute { half_width } if !(half_width > 0.0 && half_width.is_finite()) => {
                Err(invalid(format!("uniform half-width must be positive, got {half_width}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn gamma(&self, a: f64, y: f64) -> f64 {
        match self {
            Self::Absolute { .. } => (y - a).abs(),
            Self::Logistic => softplus(-y * a),
        }
    }

    /// A subgradient of `a ↦ γ(a, y)`; zero at the kink of the absolute loss.
    #[inline]
    pub fn dgamma(&self, a: f64, y: f64) -> f64 {
        match self {
            Self::Absolute { .. } => {
                if a > y {
                    1.0
                } else if a < y {
                    -1.0
                } else {
                    0.0
                }
            }
            Self::Logistic => -y * sigmoid(-y * a),
        }
    }

    /// `E γ(a, Y)` when the regression function at this point is `f_star`.
    pub fn expected_gamma(&self, a: f64, f_star: f64) -> f64 {
        match *self {
            Self::Absolute { half_width: b } => {
                let d = a - f_star;
                if d.abs() <= b {
                    (b * b + d * d) / (2.0 * b)
                } else {
                    d.abs()
                }
            }
            Self::Logistic => {
                let p = sigmoid(f_star);
                p * softplus(-a) + (1.0 - p) * softplus(a)
            }
        }
    }

    /// Derivative of `a ↦ E γ(a, Y)`.
    pub fn expected_dgamma(&self, a: f64, f_star: f64) -> f64 {
        match *self {
            Self::Absolute { half_width: b } => {
                let d = a - f_star;
                if d.abs() <= b {
                    d / b
                } else {
                    d.signum()
                }
            }
            Self::Logistic => sigmoid(a) - sigmoid(f_star),
        }
    }

    /// Quadratic margin `σ²(M)`: `E γ(a) − E γ(f*) ≥ (a − f*)²/σ²(M)` whenever
    /// `|a − f*| ≤ M` and `|f*| ≤ f_star_sup`.
    ///
    /// Absolute/uniform(b): the excess is `d²/(2b)` inside `[−b, b]` and
    /// `|d| − b/2` outside, giving `2b` for `M ≤ b` and `max(2b, M²/(M − b/2))`
    /// beyond. Logistic: the excess has second derivative `σ(a)(1 − σ(a))`, so
    /// `σ² = 2/κ` with `κ` that curvature at `|a| = f_star_sup + M`.
    pub fn margin_sigma_sq(&self, radius: f64, f_star_sup: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(invalid(format!("margin radius M must be positive, got {radius}")));
        }
        match *self {
            Self::Absolute { half_width: b } => {
                if radius <= b {
                    Ok(2.0 * b)
                } else {
                    Ok((2.0 * b).max(radius * radius / (radius - 0.5 * b)))
                }
            }
            Self::Logistic => {
                let top = f_star_sup.abs() + radius;
                let p = sigmoid(top);
                let kappa = p * (1.0 - p);
                if !(kappa > 0.0) {
                    return Err(Error::Domain(format!("logistic curvature underflows at |a| = {top}")));
                }
                Ok(2.0 / kappa)
            }
        }
    }

    pub fn margin_sigma(&self, radius: f64, f_star_sup: f64) -> Result<f64> {
        self.margin_sigma_sq(radius, f_star_sup).map(f64::sqrt)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `(1/n) Σ_i γ(f_θ(x_i), Y_i)`
pub fn empirical_risk<T: Real>(loss: &LossModel, system: &FunctionSystem<T>, theta: &[T], y: &[T]) -> Result<f64> {
    check_len(system.n(), y.len())?;
    let f = system.evaluate_slice(theta)?;
    Ok(risk_of_values(loss, &f, y))
}

pub(crate) fn risk_of_values<T: Real>(loss: &LossModel, f: &[T], y: &[T]) -> f64 {
    f.iter().zip(y).map(|(a, y)| loss.gamma(a.f64(), y.f64())).sum::<f64>() / f.len() as f64
}

/// `P γ_{f_θ} = (1/n) Σ_i E γ(f_θ(x_i), Y_i)` under the model with target `θ*`.
pub fn population_risk<T: Real>(
    loss: &LossModel,
    system: &FunctionSystem<T>,
    theta: &[T],
    theta_star: &[T],
) -> Result<f64> {
    let f = system.evaluate_slice(theta)?;
    let fs = system.evaluate_slice(theta_star)?;
    Ok(population_risk_of_values(loss, &f, &fs))
}

pub(crate) fn population_risk_of_values<T: Real>(loss: &LossModel, f: &[T], f_star: &[T]) -> f64 {
    f.iter().zip(f_star).map(|(a, s)| loss.expected_gamma(a.f64(), s.f64())).sum::<f64>() / f.len() as f64
}
