//! Randomized sparsification of a convex combination `f_θ = Σ θ_k ψ_k`.
//!
//! The index set is split into cells `V_j` of `‖·‖_n`-radius `ε^s`. Within cell
//! `j` the weights `θ_k` are renormalized into a sampling law `p_{j,k}`, and
//! `n_j = 1 + ⌊α_j / ε^{2(1−s)}⌋` atoms are drawn from it. The sparse
//! representative `Σ_j α_j ψ̄_j` uses at most `Σ_j n_j ≤ K + 1` atoms with
//! `K = ⌊(1+A) ε^{−2(1−s)}⌋`.

use rand::Rng as _;
use serde::Serialize;

use crate::covering::Partition;
use crate::design::{CoefVector, FunctionSystem};
use crate::error::{domain, invalid, Result};
use crate::mc::{self, MeanSe};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize)]
pub struct SparsificationPlan<T> {
    pub partition: Partition<T>,
    /// `α_j = Σ_{k∈V_j} θ_k`
    pub alpha: Vec<T>,
    /// Sampling law inside each cell as `(k, p_{j,k})` pairs with positive mass.
    pub probs: Vec<Vec<(usize, T)>>,
    /// `n_j`
    pub draws: Vec<usize>,
    pub eps: T,
    pub s: T,
}

/// Exponent `ε^{2(1−s)}` that sets the draw counts.
fn draw_scale<T: Real>(eps: T, s: T) -> T {
    eps.powf(T::lit(2.0) * (T::one() - s))
}

pub fn build_plan<T: Real>(
    theta: &CoefVector<T>,
    partition: &Partition<T>,
    eps: T,
    s: T,
) -> Result<SparsificationPlan<T>> {
    if !(eps > T::zero()) {
        return Err(invalid("eps must be positive"));
    }
    if !(s > T::zero() && s < T::one()) {
        return Err(invalid("s must lie in (0, 1)"));
    }
    let m: usize = partition.cells.iter().map(Vec::len).sum();
    if theta.len() != m {
        return Err(crate::error::Error::DimensionMismatch { expected: m, got: theta.len() });
    }
    let radius = eps.powf(s);
    if (partition.radius - radius).abs() > T::lit(1e-9) * radius {
        return Err(invalid(format!(
            "partition radius {} does not equal eps^s = {}",
            partition.radius, radius
        )));
    }
    if let Some(k) = theta.0.iter().position(|&t| t < T::zero()) {
        return Err(invalid(format!("convex weights must be non-negative (θ_{} < 0)", k + 1)));
    }
    let total: T = theta.0.iter().copied().sum();
    let tol = T::lit(1e-12).max(T::lit(16.0) * T::epsilon() * T::from_count(m));
    if (total - T::one()).abs() > tol {
        return Err(invalid(format!("convex weights must sum to 1 (sum = {total})")));
    }

    let scale = draw_scale(eps, s);
    let mut alpha = Vec::with_capacity(partition.cells.len());
    let mut probs = Vec::with_capacity(partition.cells.len());
    let mut draws = Vec::with_capacity(partition.cells.len());
    for (cell, &center) in partition.cells.iter().zip(&partition.centers) {
        let a: T = cell.iter().map(|&k| theta.0[k]).sum();
        alpha.push(a);
        if a > T::zero() {
            probs.push(
                cell.iter()
                    .filter(|&&k| theta.0[k] > T::zero())
                    .map(|&k| (k, theta.0[k] / a))
                    .collect(),
            );
        } else {
            probs.push(vec![(center, T::one())]);
        }
        let extra = (a / scale).floor().to_usize().unwrap_or(0);
        draws.push(1 + extra);
    }
    Ok(SparsificationPlan { partition: partition.clone(), alpha, probs, draws, eps, s })
}

/// One realization of the sparse representative.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample<T> {
    /// `ψ̄_j` evaluated on the design, one vector per cell.
    pub cell_means: Vec<Vec<T>>,
    /// `f̃ = Σ_j α_j ψ̄_j`
    pub values: Vec<T>,
    /// Number of distinct base functions drawn.
    pub atoms: usize,
    pub total_draws: usize,
}

impl<T: Real> SparsificationPlan<T> {
    pub fn total_draws(&self) -> usize {
        self.draws.iter().sum()
    }

    /// `g_j = Σ_k p_{j,k} ψ_k` on the design.
    pub fn cell_targets(&self, system: &FunctionSystem<T>) -> Vec<Vec<T>> {
        self.probs
            .iter()
            .map(|p| {
                let mut g = vec![T::zero(); system.n()];
                for &(k, pk) in p {
                    for (gi, &v) in g.iter_mut().zip(system.row(k)) {
                        *gi = *gi + pk * v;
                    }
                }
                g
            })
            .collect()
    }

    /// `4 ε^{2s} Σ_j α_j² / n_j`, the middle term of the second-moment chain.
    pub fn variance_bound(&self) -> T {
        let c = T::lit(4.0) * self.eps.powf(T::lit(2.0) * self.s);
        c * self
            .alpha
            .iter()
            .zip(&self.draws)
            .map(|(&a, &nj)| a * a / T::from_count(nj))
            .sum::<T>()
    }

    pub fn sample_representative(&self, system: &FunctionSystem<T>, rng: &mut mc::Rng) -> SparseSample<T> {
        let n = system.n();
        let mut used = vec![false; system.m()];
        let mut cell_means = Vec::with_capacity(self.draws.len());
        let mut values = vec![T::zero(); n];
        for ((p, &nj), &a) in self.probs.iter().zip(&self.draws).zip(&self.alpha) {
            let mut mean = vec![T::zero(); n];
            let w = T::one() / T::from_count(nj);
            for _ in 0..nj {
                let k = draw_index(p, rng);
                used[k] = true;
                for (o, &v) in mean.iter_mut().zip(system.row(k)) {
                    *o = *o + w * v;
                }
            }
            for (o, &v) in values.iter_mut().zip(&mean) {
                *o = *o + a * v;
            }
            cell_means.push(mean);
        }
        SparseSample {
            cell_means,
            values,
            atoms: used.iter().filter(|&&u| u).count(),
            total_draws: self.total_draws(),
        }
    }
}

fn draw_index<T: Real>(p: &[(usize, T)], rng: &mut mc::Rng) -> usize {
    if p.len() == 1 {
        return p[0].0;
    }
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(k, pk) in p {
        acc += pk.f64();
        if u < acc {
            return k;
        }
    }
    p[p.len() - 1].0
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    let ss: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    ss / T::from_count(a.len())
}

/// Monte Carlo mean and standard error of `‖f̃ − f_θ‖_n²` over `reps`
/// independent representatives.
pub fn approximation_error_mc<T: Real>(
    plan: &SparsificationPlan<T>,
    system: &FunctionSystem<T>,
    theta: &CoefVector<T>,
    reps: usize,
    seed: u64,
) -> Result<MeanSe> {
    if reps < 2 {
        return Err(invalid("approximation_error_mc needs at least 2 replications"));
    }
    let f = system.evaluate(theta)?;
    let errs = mc::replicate(reps, |r| {
        let mut rng = mc::rng_for(seed, 0x3a0e, r as u64);
        let smp = plan.sample_representative(system, &mut rng);
        sq_dist(&smp.values, &f).f64()
    });
    mc::mean_se(&errs)
}

/// Approximation error together with the largest atom count seen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproximationStudy {
    pub eps: f64,
    pub mc_mean: f64,
    pub mc_se: f64,
    pub replications: usize,
    /// `4ε²`
    pub bound: f64,
    pub variance_bound: f64,
    pub max_atoms: usize,
    pub total_draws: usize,
}

impl ApproximationStudy {
    pub fn within_bound(&self, k: f64) -> bool {
        self.mc_mean <= self.bound + k * self.mc_se
    }
}

/// Same draws as [`approximation_error_mc`], also tracking atoms per draw.
pub fn approximation_study<T: Real>(
    plan: &SparsificationPlan<T>,
    system: &FunctionSystem<T>,
    theta: &CoefVector<T>,
    reps: usize,
    seed: u64,
) -> Result<ApproximationStudy> {
    if reps < 2 {
        return Err(invalid("approximation_study needs at least 2 replications"));
    }
    let f = system.evaluate(theta)?;
    let runs = mc::replicate(reps, |r| {
        let mut rng = mc::rng_for(seed, 0x3a0e, r as u64);
        let smp = plan.sample_representative(system, &mut rng);
        (sq_dist(&smp.values, &f).f64(), smp.atoms)
    });
    let errs: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let ms = mc::mean_se(&errs)?;
    let eps = plan.eps.f64();
    Ok(ApproximationStudy {
        eps,
        mc_mean: ms.mean,
        mc_se: ms.se,
        replications: reps,
        bound: 4.0 * eps * eps,
        variance_bound: plan.variance_bound().f64(),
        max_atoms: runs.iter().map(|r| r.1).max().unwrap_or(0),
        total_draws: plan.total_draws(),
    })
}

/// Per-cell Monte Carlo estimates of `‖ψ̄_j − g_j‖_n²`.
pub fn cell_error_mc<T: Real>(
    plan: &SparsificationPlan<T>,
    system: &FunctionSystem<T>,
    reps: usize,
    seed: u64,
) -> Result<Vec<MeanSe>> {
    if reps < 2 {
        return Err(invalid("cell_error_mc needs at least 2 replications"));
    }
    let targets = plan.cell_targets(system);
    let per_rep: Vec<Vec<f64>> = mc::replicate(reps, |r| {
        let mut rng = mc::rng_for(seed, 0x3a0e, r as u64);
        let smp = plan.sample_representative(system, &mut rng);
        smp.cell_means.iter().zip(&targets).map(|(a, g)| sq_dist(a, g).f64()).collect()
    });
    (0..targets.len())
        .map(|j| mc::mean_se(&per_rep.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinatorialBudget<T> {
    /// Number of cells `N`.
    pub cells: usize,
    /// `K = ⌊(1+A) ε^{−2(1−s)}⌋`
    pub k: usize,
    pub sum_draws: usize,
    /// `A ε^{−sV} = A ε^{−2(1−s)}`, the envelope bound on `N`.
    pub cell_bound: T,
    /// `log2 |Π|` bound `(1+2A) ε^{−2(1−s)} log2(2m)`.
    pub pi_bound_log2: T,
    /// `log2` of the intermediate bound `4 · 2^{(1+2A)ε^{−2(1−s)}} · m^{(1+A)ε^{−2(1−s)}}`.
    pub pi_intermediate_log2: T,
}

pub fn combinatorial_budget<T: Real>(plan: &SparsificationPlan<T>, a: T, m: usize) -> Result<CombinatorialBudget<T>> {
    if a < T::one() {
        return Err(domain(format!("A >= 1 violated (A = {a})")));
    }
    if m < 4 {
        return Err(domain(format!("m >= 4 violated (m = {m})")));
    }
    let floor = T::lit(16.0) / T::from_count(m);
    if plan.eps < floor {
        return Err(domain(format!("eps >= 16/m violated (eps = {}, 16/m = {})", plan.eps, floor)));
    }
    let inv = T::one() / draw_scale(plan.eps, plan.s);
    let k = ((T::one() + a) * inv).floor().to_usize().expect("finite budget");
    let cells = plan.partition.cell_count();
    let cell_bound = a * inv;
    if T::from_count(cells) > cell_bound {
        return Err(domain(format!("N <= A eps^(-sV) violated (N = {cells}, bound = {cell_bound})")));
    }
    let sum_draws = plan.total_draws();
    if sum_draws > k + 1 {
        return Err(domain(format!("sum n_j <= K + 1 violated ({sum_draws} > {})", k + 1)));
    }
    let two = T::lit(2.0);
    let log2 = |x: T| x.ln() / two.ln();
    let pi_bound_log2 = (T::one() + two * a) * inv * log2(two * T::from_count(m));
    let pi_intermediate_log2 = two + (T::one() + two * a) * inv + (T::one() + a) * inv * log2(T::from_count(m));
    Ok(CombinatorialBudget { cells, k, sum_draws, cell_bound, pi_bound_log2, pi_intermediate_log2 })
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub size: usize,
    pub alpha: f64,
    pub n_j: usize,
}

/// JSON-ready plan summary.
#[derive(Debug, Clone, Serialize)]
pub struct PlanSummary {
    pub radius: f64,
    #[serde(rename = "N")]
    pub cells_count: usize,
    pub cells: Vec<CellSummary>,
    #[serde(rename = "K")]
    pub k: usize,
    pub pi_bound_log2: f64,
}

impl PlanSummary {
    pub fn new<T: Real>(plan: &SparsificationPlan<T>, budget: &CombinatorialBudget<T>) -> Self {
        Self {
            radius: plan.partition.radius.f64(),
            cells_count: plan.partition.cell_count(),
            cells: plan
                .partition
                .cells
                .iter()
                .zip(&plan.alpha)
                .zip(&plan.draws)
                .map(|((c, &a), &nj)| CellSummary { size: c.len(), alpha: a.f64(), n_j: nj })
                .collect(),
            k: budget.k,
            pi_bound_log2: budget.pi_bound_log2.f64(),
        }
    }
}
