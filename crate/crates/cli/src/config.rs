//! Flat TOML experiment configuration.
//!
//! Every key is optional at parse time; each subcommand names the keys it
//! requires and checks ranges before any computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use l1bound::design::NoiseFamily;
use l1bound::estimator::LossModel;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; `--seed` overrides it.
    pub seed: Option<u64>,
    /// Rayon worker count; `--workers` overrides it. Defaults to 1.
    pub workers: Option<usize>,

    // design: either the TV sizes or a CSV with one row per base function
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub system_csv: Option<String>,

    // covering
    pub eps_grid: Option<Vec<f64>>,
    /// Envelope exponent `V`; fitted from the counts when absent.
    pub v: Option<f64>,
    /// Envelope constant `A`; taken from the covering fit when absent.
    pub a: Option<f64>,
    /// Smoothness `s`; `2/(2+V)` when absent.
    pub s: Option<f64>,

    // Monte Carlo
    pub reps: Option<usize>,
    pub tol: Option<f64>,

    // maurey
    pub eps: Option<f64>,
    /// Convex weights; uniform when absent.
    pub theta: Option<Vec<f64>>,

    // epsim / tail
    pub radius_grid: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub sigma_grid: Option<Vec<f64>>,
    pub restarts: Option<usize>,
    pub steps: Option<usize>,

    // loss and target
    /// `absolute` or `logistic`.
    pub loss: Option<String>,
    pub half_width: Option<f64>,
    pub theta_star: Option<Vec<f64>>,

    // estimator
    pub lambda_n: Option<f64>,
    pub ratio: Option<f64>,
    pub index: Option<u64>,

    // verify
    pub c: Option<f64>,
    /// `explicit`, `given` or `calibrate`.
    pub lambda0_mode: Option<String>,
    pub lambda0: Option<f64>,
    pub calibration_reps: Option<usize>,
    pub calibration_points: Option<usize>,

    // rate
    pub n_grid: Option<Vec<usize>>,
    pub sigma_sq: Option<f64>,
    pub kappa: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

/// Shorthand for named precondition failures.
pub fn violated(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn require<T: Clone>(value: &Option<T>, key: &str, cmd: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| violated(format!("missing required key `{key}` for `{cmd}`")))
}

pub fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(violated(format!("`{key}` must be positive and finite, got {v}")))
    }
}

pub fn at_least(key: &str, v: usize, lo: usize) -> Result<usize, CliError> {
    if v >= lo {
        Ok(v)
    } else {
        Err(violated(format!("`{key}` must be at least {lo}, got {v}")))
    }
}

pub fn positive_grid(key: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(violated(format!("`{key}` must not be empty")));
    }
    for &v in grid {
        positive(key, v)?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn reps_at_least(&self, cmd: &str, lo: usize) -> Result<usize, CliError> {
        at_least("reps", require(&self.reps, "reps", cmd)?, lo)
    }

    pub fn tol_or(&self, default: f64) -> Result<f64, CliError> {
        positive("tol", self.tol.unwrap_or(default))
    }

    /// Loss from `loss` and `half_width`.
    pub fn loss_model(&self, cmd: &str) -> Result<LossModel, CliError> {
        let kind = require(&self.loss, "loss", cmd)?;
        match kind.as_str() {
            "absolute" => {
                let b = positive("half_width", require(&self.half_width, "half_width", cmd)?)?;
                Ok(LossModel::Absolute { half_width: b })
            }
            "logistic" => {
                if self.half_width.is_some() {
                    return Err(violated("`half_width` applies only to `loss = \"absolute\"`"));
                }
                Ok(LossModel::Logistic)
            }
            other => Err(violated(format!("`loss` must be \"absolute\" or \"logistic\", got {other:?}"))),
        }
    }

    pub fn noise(&self, cmd: &str) -> Result<NoiseFamily, CliError> {
        Ok(self.loss_model(cmd)?.noise())
    }

    pub fn smoothness(&self) -> Result<Option<f64>, CliError> {
        match self.s {
            Some(s) if s > 0.0 && s < 1.0 => Ok(Some(s)),
            Some(s) => Err(violated(format!("`s` must lie in (0,1), got {s}"))),
            None => Ok(None),
        }
    }
}
