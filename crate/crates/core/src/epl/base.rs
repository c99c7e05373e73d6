//! Monte Carlo over Rademacher draws for the linear base process
//! `θ ↦ (1/n) Σ_i f_θ(x_i) ε_i = ⟨θ, ξ⟩`.

use std::io::Write;

use serde::Serialize;

use super::bounds::{increment_bound, finite_class_bound, rademacher_range_constant};
use super::draw::{draw_xi, RademacherDraw};
use super::feasible::Geometry;
use super::sup::{sup_base_process_with, SupOptions, SupSolution};
use crate::design::FunctionSystem;
use crate::error::{invalid, Error, Result};
use crate::mc::{self, binomial_se, mean_se};
use crate::scalar::Real;

pub(crate) const STREAM_XI: u64 = 0x0e91_0001;

/// MC estimate of `E Z_{ε,M}` next to its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementEstimate {
    pub eps: f64,
    #[serde(rename = "M")]
    pub radius: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub bound: f64,
    pub replications: usize,
    pub seed: u64,
    /// Replications whose solver failed; the estimate is invalid if nonzero.
    pub failures: usize,
}

impl IncrementEstimate {
    pub fn ratio(&self) -> f64 {
        self.mc_mean / self.bound
    }

    pub fn is_valid(&self) -> bool {
        self.failures == 0
    }

    /// `mc_mean + k·mc_se ≤ bound`
    pub fn within_bound(&self, k: f64) -> bool {
        self.is_valid() && self.mc_mean + k * self.mc_se <= self.bound
    }
}

/// CSV with columns `eps,M,mc_mean,mc_se,bound,ratio,replications,failures`.
pub fn write_increment_csv<W: Write>(rows: &[IncrementEstimate], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["eps", "M", "mc_mean", "mc_se", "bound", "ratio", "replications", "failures"])?;
    for r in rows {
        wr.write_record([
            r.eps.to_string(),
            r.radius.to_string(),
            r.mc_mean.to_string(),
            r.mc_se.to_string(),
            r.bound.to_string(),
            r.ratio().to_string(),
            r.replications.to_string(),
            r.failures.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// A system together with its Gram eigen-decomposition.
#[derive(Debug, Clone)]
pub struct BaseProcess<'a, T> {
    pub system: &'a FunctionSystem<T>,
    pub geometry: Geometry<T>,
    pub options: SupOptions,
}

impl<'a, T: Real> BaseProcess<'a, T> {
    pub fn new(system: &'a FunctionSystem<T>) -> Self {
        Self { system, geometry: Geometry::new(system.gram()), options: SupOptions::default() }
    }

    /// Draw number `index` of stream `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> RademacherDraw<T> {
        draw_xi(self.system, mc::derive_seed(seed, STREAM_XI, index))
    }

    pub fn sup(&self, xi: &[T], eps: T, radius: T, tol: T) -> Result<SupSolution<T>> {
        sup_base_process_with(&self.geometry, xi, eps, radius, tol, self.options)
    }

    /// `R` suprema in replication order; failed replications are `Err`.
    pub fn sup_samples(&self, eps: T, radius: T, reps: usize, seed: u64, tol: T) -> Vec<Result<f64>> {
        mc::replicate(reps, |r| {
            let d = self.draw(seed, r as u64);
            self.sup(&d.xi, eps, radius, tol).map(|s| s.value.f64())
        })
    }

    /// MC mean of `Z_{ε,M}` with the bound field from the renormalized
    /// expectation bound `20√(1+4A) M^{1−s} ε^s √(log(12m)/n)`.
    pub fn mc_mean(&self, eps: T, radius: T, reps: usize, seed: u64, a: T, s: T, tol: T) -> Result<IncrementEstimate> {
        if reps < 2 {
            return Err(invalid(format!("need at least 2 replications, got {reps}")));
        }
        let bound = increment_bound(eps, radius, a, s, self.system.m(), self.system.n())?;
        let samples = self.sup_samples(eps, radius, reps, seed, tol);
        let ok: Vec<f64> = samples.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let failures = reps - ok.len();
        let (mean, se) = if ok.len() >= 2 {
            let ms = mean_se(&ok)?;
            (ms.mean, ms.se)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(IncrementEstimate {
            eps: eps.f64(),
            radius: radius.f64(),
            mc_mean: mean,
            mc_se: se,
            bound: bound.f64(),
            replications: reps,
            seed,
            failures,
        })
    }
}

/// Free-function form of [`BaseProcess::mc_mean`].
#[allow(clippy::too_many_arguments)]
pub fn mc_mean_base<T: Real>(
    system: &FunctionSystem<T>,
    eps: T,
    radius: T,
    reps: usize,
    seed: u64,
    a: T,
    s: T,
    tol: T,
) -> Result<IncrementEstimate> {
    BaseProcess::new(system).mc_mean(eps, radius, reps, seed, a, s, tol)
}

/// `E max_k |ξ_k|` against `2L√(log(3m)/n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteClassEstimate {
    pub mc_mean: f64,
    pub mc_se: f64,
    /// Range constant `L = 2·max_k ‖ψ_k‖_n`.
    pub range_constant: f64,
    pub bound: f64,
    pub replications: usize,
}

impl FiniteClassEstimate {
    /// `mc_mean − 3·SE ≤ bound`
    pub fn passes(&self) -> bool {
        self.mc_mean - 3.0 * self.mc_se <= self.bound
    }

    /// The crude increment bound `M·E max_k |ξ_k|`.
    pub fn trivial_increment_bound(&self, radius: f64) -> f64 {
        radius * self.mc_mean
    }
}

pub fn mc_max_finite_class<T: Real>(system: &FunctionSystem<T>, reps: usize, seed: u64) -> Result<FiniteClassEstimate> {
    if reps < 2 {
        return Err(invalid(format!("need at least 2 replications, got {reps}")));
    }
    let vals = mc::replicate(reps, |r| draw_xi(system, mc::derive_seed(seed, STREAM_XI, r as u64)).max_abs().f64());
    let ms = mean_se(&vals)?;
    let l = rademacher_range_constant(system);
    let bound = finite_class_bound(l, system.m(), system.n())?;
    Ok(FiniteClassEstimate {
        mc_mean: ms.mean,
        mc_se: ms.se,
        range_constant: l.f64(),
        bound: bound.f64(),
        replications: reps,
    })
}

/// Exact `E max_k |ξ_k|` by enumerating all `2ⁿ` sign patterns (`n ≤ 20`).
pub fn exact_mean_max_abs<T: Real>(system: &FunctionSystem<T>) -> Result<f64> {
    let n = system.n();
    if n > 20 {
        return Err(invalid(format!("exact enumeration limited to n <= 20, got {n}")));
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        let signs: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
        total += RademacherDraw::from_signs(system, signs)?.max_abs().f64();
    }
    Ok(total / (1u64 << n) as f64)
}

/// One row of the concentration check `P(Z ≥ EZ + z) ≤ exp(−nz²/(2L²))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub z: f64,
    pub frequency: f64,
    pub bound: f64,
    pub binomial_se: f64,
}

impl ConcentrationRow {
    pub fn passes(&self) -> bool {
        self.frequency <= self.bound + 3.0 * self.binomial_se.max(1.0 / (4.0 * 1e4))
    }
}

/// Concentration of `Z_{ε,M}` around its MC mean. Each summand
/// `ε_i f_θ(x_i)` has range `2|f_θ(x_i)|`, so `L = 2ε` on the ellipsoid. The
/// `z` values are chosen so the bound equals each entry of `levels`.
pub fn concentration_check<T: Real>(
    process: &BaseProcess<'_, T>,
    eps: T,
    radius: T,
    reps: usize,
    seed: u64,
    levels: &[f64],
    tol: T,
) -> Result<Vec<ConcentrationRow>> {
    if reps < 2 {
        return Err(invalid(format!("need at least 2 replications, got {reps}")));
    }
    let samples = process.sup_samples(eps, radius, reps, seed, tol);
    let vals = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    let mean = mean_se(&vals)?.mean;
    let n = process.system.n() as f64;
    let l = 2.0 * eps.f64();
    levels
        .iter()
        .map(|&p| {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidArgument(format!("tail level must lie in (0,1), got {p}")));
            }
            let z = l * (2.0 * (1.0 / p).ln() / n).sqrt();
            let hits = vals.iter().filter(|&&v| v >= mean + z).count();
            let frequency = hits as f64 / reps as f64;
            Ok(ConcentrationRow { z, frequency, bound: p, binomial_se: binomial_se(p, reps) })
        })
        .collect()
}

/// MC calibration of a `λ_{n,0}` satisfying `E Z_loss ≤ λ_{n,0} ε^s M^{1−s}`
/// for all `8/m ≤ ε/M ≤ 1`.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaCalibration {
    pub lambda0: f64,
    /// `(ρ = ε/M at M = 1, MC mean of Z_base, SE)`, increasing in `ρ`.
    pub rows: Vec<(f64, f64, f64)>,
    pub replications: usize,
}

/// Both sides of the premise scale linearly under `(ε, M) → (cε, cM)`, so
/// only `ρ = ε/M` matters. On a geometric `ρ` grid, the monotonicity of
/// `Z_base` in `ε` bounds the ratio between grid points by
/// `(mean_{j+1} + 3 SE_{j+1}) / ρ_j^s`. Symmetrization and contraction give the
/// factor 4 from the base process to the loss process.
pub fn calibrate_lambda0<T: Real>(
    process: &BaseProcess<'_, T>,
    s: f64,
    points: usize,
    reps: usize,
    seed: u64,
    tol: f64,
) -> Result<LambdaCalibration> {
    if points < 2 {
        return Err(invalid("calibration grid needs at least two points"));
    }
    let m = process.system.m() as f64;
    let lo = (8.0 / m).min(1.0);
    let rhos: Vec<f64> =
        (0..points).map(|j| lo * (1.0 / lo).powf(j as f64 / (points - 1) as f64)).collect();
    let mut rows = Vec::with_capacity(points);
    for &rho in &rhos {
        let vals = process
            .sup_samples(T::lit(rho), T::one(), reps, seed, T::lit(tol))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let ms = mean_se(&vals)?;
        rows.push((rho, ms.mean, ms.se));
    }
    let mut worst = 0.0f64;
    for j in 0..points {
        let upper = rows[(j + 1).min(points - 1)];
        worst = worst.max((upper.1 + 3.0 * upper.2) / rows[j].0.powf(s));
    }
    Ok(LambdaCalibration { lambda0: 4.0 * worst, rows, replications: reps })
}
