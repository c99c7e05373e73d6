//! The centred loss process `θ ↦ (P_n − P)(γ_{f_θ} − γ_{f*})` on a synthetic
//! instance, its supremum over `{‖f_θ − f*‖_n ≤ ε, I(θ − θ*) ≤ M}`, and the
//! tail and symmetrization checks built on it.

use rand::Rng as _;
use serde::Serialize;

use super::base::BaseProcess;
use super::bounds::{threshold_and_tail, TailBound};
use super::feasible::FeasibleSet;
use crate::design::SyntheticInstance;
use crate::error::{invalid, Error, Result};
use crate::estimator::LossModel;
use crate::mc::{self, binomial_se, mean_se};
use crate::scalar::{dot, Real};

const STREAM_DATA: u64 = 0x0e91_0002;
const STREAM_START: u64 = 0x0e91_0003;

/// Best value found for the loss-process supremum. It is a lower bound on the
/// true supremum.
#[derive(Debug, Clone, Serialize)]
pub struct LossSupEstimate {
    pub value: f64,
    pub theta: Vec<f64>,
    /// No ascent run settled within `tol` before its budget ran out.
    pub low_confidence: bool,
    pub runs: usize,
}

/// Options for [`LossProcess::sup`].
#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    /// Random starts in addition to the two linearization starts.
    pub restarts: usize,
    pub steps: usize,
    pub tol: f64,
    /// For `m` up to this size, every signed `ℓ1` vertex `±M e_k` (pulled
    /// into the ellipsoid) also starts a run of each sign.
    pub vertex_limit: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { restarts: 2, steps: 60, tol: 1e-6, vertex_limit: 8 }
    }
}

#[derive(Debug)]
pub struct LossProcess<'a, T> {
    pub instance: &'a SyntheticInstance<T>,
    pub loss: LossModel,
    pub base: BaseProcess<'a, T>,
    f_star: Vec<f64>,
    theta_star: Vec<f64>,
}

impl<'a, T: Real> LossProcess<'a, T> {
    pub fn new(instance: &'a SyntheticInstance<T>, loss: LossModel) -> Result<Self> {
        if loss.noise() != instance.noise {
            return Err(Error::Unsupported(format!(
                "no closed-form population risk for loss {loss:?} under noise {:?}",
                instance.noise
            )));
        }
        Ok(Self {
            instance,
            loss,
            base: BaseProcess::new(&instance.system),
            f_star: instance.f_star().iter().map(|v| v.f64()).collect(),
            theta_star: instance.theta_star.0.iter().map(|v| v.f64()).collect(),
        })
    }

    fn n(&self) -> usize {
        self.instance.system.n()
    }

    /// Responses for replication `index` of stream `seed`.
    pub fn data(&self, seed: u64, index: u64) -> Vec<T> {
        self.instance.generate(mc::derive_seed(seed, STREAM_DATA, index))
    }

    fn delta_values(&self, delta: &[f64]) -> Vec<f64> {
        let sys = &self.instance.system;
        let mut out = vec![0.0; self.n()];
        for (k, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(sys.row(k)) {
                *o += d * v.f64();
            }
        }
        out
    }

    /// `(P_n − P)(γ_{f*+f_δ} − γ_{f*})`
    pub fn increment(&self, delta: &[f64], y: &[f64]) -> f64 {
        let fd = self.delta_values(delta);
        let mut total = 0.0;
        for i in 0..self.n() {
            let a = self.f_star[i] + fd[i];
            let fs = self.f_star[i];
            total += self.loss.gamma(a, y[i]) - self.loss.gamma(fs, y[i]) - self.loss.expected_gamma(a, fs)
                + self.loss.expected_gamma(fs, fs);
        }
        total / self.n() as f64
    }

    fn gradient(&self, delta: &[f64], y: &[f64]) -> Vec<f64> {
        let fd = self.delta_values(delta);
        let w: Vec<T> = (0..self.n())
            .map(|i| {
                let a = self.f_star[i] + fd[i];
                T::lit(self.loss.dgamma(a, y[i]) - self.loss.expected_dgamma(a, self.f_star[i]))
            })
            .collect();
        let g = self.instance.system.correlate(&w).expect("length n");
        g.iter().map(|v| v.f64()).collect()
    }

    /// Multi-start projected subgradient ascent of `±` the increment. Two
    /// starts come from the linearization at `θ*` (the base-process maximizer
    /// for `ξ̃ = (1/n)Σ ψ(x_i) γ'(f*(x_i), Y_i)` and its negative); the others
    /// are random points of the feasible set.
    pub fn sup(&self, y: &[T], eps: f64, radius: f64, opts: AscentOptions, seed: u64) -> Result<LossSupEstimate> {
        let m = self.instance.system.m();
        if eps < 0.0 || radius < 0.0 {
            return Err(invalid("loss-process supremum needs eps >= 0 and M >= 0"));
        }
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: y.len() });
        }
        if eps == 0.0 || radius == 0.0 {
            return Ok(LossSupEstimate { value: 0.0, theta: self.theta_star.clone(), low_confidence: false, runs: 0 });
        }
        let yf: Vec<f64> = y.iter().map(|v| v.f64()).collect();
        let (et, mt) = (T::lit(eps), T::lit(radius));
        let set = FeasibleSet { geometry: &self.base.geometry, eps: et, radius: mt };

        let zeta = self.gradient(&vec![0.0; m], &yf);
        let zeta_t: Vec<T> = zeta.iter().map(|&v| T::lit(v)).collect();
        let lin = self.base.sup(&zeta_t, et, mt, T::lit(opts.tol.max(1e-12)))?;
        let lin: Vec<f64> = lin.theta.iter().map(|v| v.f64()).collect();
        let mut starts: Vec<(Vec<f64>, f64)> = vec![(lin.clone(), 1.0), (lin.iter().map(|v| -v).collect(), -1.0)];
        let mut rng = mc::rng_for(seed, STREAM_START, 0);
        for r in 0..opts.restarts {
            let raw: Vec<T> = (0..m).map(|_| T::lit(2.0 * rng.gen::<f64>() - 1.0)).collect();
            let scale = T::lit(rng.gen::<f64>());
            let p: Vec<f64> = set.pull_inside(&raw.iter().map(|&v| v * T::lit(1e6)).collect::<Vec<_>>())
                .iter()
                .map(|&v| (v * scale).f64())
                .collect();
            starts.push((p, if r % 2 == 0 { 1.0 } else { -1.0 }));
        }

        if m <= opts.vertex_limit {
            for k in 0..m {
                for dir in [1.0, -1.0] {
                    let mut v = vec![T::zero(); m];
                    v[k] = T::lit(dir * radius);
                    let p: Vec<f64> = set.pull_inside(&v).iter().map(|x| x.f64()).collect();
                    starts.push((p.clone(), 1.0));
                    starts.push((p, -1.0));
                }
            }
        }

        let mut best = (0.0f64, vec![0.0; m]);
        let mut settled = false;
        let eta0 = 0.1 * radius.min(eps * 4.0);
        for (start, sign) in &starts {
            let mut delta = start.clone();
            let mut run_best = sign * self.increment(&delta, &yf);
            let quarter = opts.steps - opts.steps / 4;
            let mut best_at_quarter = run_best;
            for step in 0..opts.steps {
                if step == quarter {
                    best_at_quarter = run_best;
                }
                let g = self.gradient(&delta, &yf);
                let gn = dot(&g, &g).sqrt();
                if gn == 0.0 {
                    best_at_quarter = run_best;
                    break;
                }
                let eta = eta0 / ((step + 1) as f64).sqrt();
                let z: Vec<T> = delta.iter().zip(&g).map(|(d, gk)| T::lit(d + sign * eta * gk / gn)).collect();
                let p = set.project(&z, 200, T::lit(1e-9));
                delta = p.iter().map(|v| v.f64()).collect();
                let val = sign * self.increment(&delta, &yf);
                if val > run_best {
                    run_best = val;
                }
                if val.abs() > best.0 {
                    best = (val.abs(), delta.clone());
                }
            }
            // settled: the final quarter of the run gained little
            if run_best - best_at_quarter <= 1e-3 * run_best.abs() + opts.tol {
                settled = true;
            }
            let v0 = self.increment(start, &yf).abs();
            if v0 > best.0 {
                best = (v0, start.clone());
            }
            // linearization jumps: move to the extreme point maximizing the
            // current subgradient while that improves
            let mut cur = if sign * self.increment(&best.1, &yf) >= run_best { best.1.clone() } else { delta };
            let mut cur_val = sign * self.increment(&cur, &yf);
            for _ in 0..opts.steps {
                let g: Vec<T> = self.gradient(&cur, &yf).iter().map(|&v| T::lit(sign * v)).collect();
                let Ok(jump) = self.base.sup(&g, et, mt, T::lit(opts.tol.max(1e-12))) else { break };
                let cand: Vec<f64> = jump.theta.iter().map(|v| v.f64()).collect();
                let val = sign * self.increment(&cand, &yf);
                if val <= cur_val + 1e-14 {
                    break;
                }
                cur = cand;
                cur_val = val;
            }
            if cur_val.abs() > best.0 {
                best = (cur_val.abs(), cur);
            }
        }
        let theta = self.theta_star.iter().zip(&best.1).map(|(a, b)| a + b).collect();
        Ok(LossSupEstimate { value: best.0, theta, low_confidence: !settled, runs: starts.len() })
    }

    /// Loss-process supremum estimates over `R` independent datasets.
    pub fn sup_samples(&self, eps: f64, radius: f64, reps: usize, seed: u64, opts: AscentOptions) -> Vec<Result<LossSupEstimate>> {
        mc::replicate(reps, |r| {
            let y = self.data(seed, r as u64);
            self.sup(&y, eps, radius, opts, mc::derive_seed(seed, STREAM_START, r as u64))
        })
    }
}

/// Empirical exceedance frequency of the tail threshold.
#[derive(Debug, Clone, Serialize)]
pub struct TailCheck {
    pub eps: f64,
    #[serde(rename = "M")]
    pub radius: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub tail_bound: f64,
    pub frequency: f64,
    pub binomial_se: f64,
    pub replications: usize,
    pub mean_estimate: f64,
    pub max_estimate: f64,
    pub low_confidence: usize,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn tail_check<T: Real>(
    process: &LossProcess<'_, T>,
    eps: f64,
    radius: f64,
    sigma: f64,
    a: f64,
    s: f64,
    reps: usize,
    seed: u64,
    opts: AscentOptions,
) -> Result<TailCheck> {
    if reps < 2 {
        return Err(invalid(format!("tail check needs at least 2 replications for a standard error, got {reps}")));
    }
    let sys = &process.instance.system;
    let TailBound { threshold, tail_bound } = threshold_and_tail(eps, radius, sigma, a, s, sys.m(), sys.n())?;
    let est = process.sup_samples(eps, radius, reps, seed, opts).into_iter().collect::<Result<Vec<_>>>()?;
    let hits = est.iter().filter(|e| e.value >= threshold).count();
    let frequency = hits as f64 / reps as f64;
    let se = binomial_se(tail_bound, reps);
    let vals: Vec<f64> = est.iter().map(|e| e.value).collect();
    Ok(TailCheck {
        eps,
        radius,
        sigma,
        threshold,
        tail_bound,
        frequency,
        binomial_se: se,
        replications: reps,
        mean_estimate: vals.iter().sum::<f64>() / reps as f64,
        max_estimate: vals.iter().cloned().fold(0.0, f64::max),
        low_confidence: est.iter().filter(|e| e.low_confidence).count(),
        pass: frequency <= tail_bound + 3.0 * se,
    })
}

/// `E Z_loss ≤ 4·E Z_base` at matched `(ε, M)`, checked with `+4·SE`.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetrizationCheck {
    pub eps: f64,
    #[serde(rename = "M")]
    pub radius: f64,
    pub loss_mean: f64,
    pub loss_se: f64,
    pub base_mean: f64,
    pub base_se: f64,
    pub replications: usize,
    pub pass: bool,
}

pub fn symmetrization_check<T: Real>(
    process: &LossProcess<'_, T>,
    eps: f64,
    radius: f64,
    reps: usize,
    seed: u64,
    opts: AscentOptions,
) -> Result<SymmetrizationCheck> {
    let loss = process.sup_samples(eps, radius, reps, seed, opts).into_iter().collect::<Result<Vec<_>>>()?;
    let loss = mean_se(&loss.iter().map(|e| e.value).collect::<Vec<_>>())?;
    let base = process
        .base
        .sup_samples(T::lit(eps), T::lit(radius), reps, seed, T::lit(1e-9))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let base = mean_se(&base)?;
    let se = (loss.se.powi(2) + 16.0 * base.se.powi(2)).sqrt();
    Ok(SymmetrizationCheck {
        eps,
        radius,
        loss_mean: loss.mean,
        loss_se: loss.se,
        base_mean: base.mean,
        base_se: base.se,
        replications: reps,
        pass: loss.mean <= 4.0 * base.mean + 4.0 * se,
    })
}
