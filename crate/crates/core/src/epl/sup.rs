//! `Z = sup { ⟨θ, ξ⟩ : θᵀΣθ ≤ ε², ‖θ‖₁ ≤ M }` for a fixed vector `ξ`.

use serde::Serialize;

use super::feasible::{FeasibleSet, Geometry};
use crate::design::ell1_norm;
use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, Serialize)]
pub struct SupSolution<T> {
    /// Objective at `theta`; a lower bound on the supremum.
    pub value: T,
    pub theta: Vec<T>,
    /// Dual certificate; the supremum lies in `[value, upper_bound]`.
    pub upper_bound: T,
    pub iterations: usize,
}

impl<T: Real> SupSolution<T> {
    pub fn gap(&self) -> T {
        self.upper_bound - self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupMethod {
    /// Log-barrier interior point on the lifted problem `|θ_k| ≤ u_k`, `Σu ≤ M`.
    Barrier,
    /// Projected gradient ascent with Dykstra projections.
    ProjectedGradient,
}

/// Solver choice and iteration budget for [`sup_base_process`].
#[derive(Debug, Clone, Copy)]
pub struct SupOptions {
    pub method: SupMethod,
    /// Outer iterations: barrier stages or gradient steps per start.
    pub max_outer: usize,
    /// Newton steps per barrier stage, or Dykstra sweeps per projection.
    pub max_inner: usize,
}

impl Default for SupOptions {
    fn default() -> Self {
        Self { method: SupMethod::Barrier, max_outer: 60, max_inner: 200 }
    }
}

/// `UB(w) = M‖ξ − Σw‖∞ + ε‖w‖_Σ`, valid for every `w` by Hölder and Cauchy–Schwarz.
fn upper_bound_along<T: Real>(set: &FeasibleSet<'_, T>, xi: &[T], dir: &[T]) -> T {
    let sd = set.geometry.gram.mul_vec(dir);
    let dnorm = dot(dir, &sd).max(T::zero()).sqrt();
    let linf = |t: T| xi.iter().zip(&sd).fold(T::zero(), |a, (&x, &v)| a.max((x - t * v).abs()));
    let ub0 = set.radius * linf(T::zero());
    if dnorm == T::zero() {
        return ub0;
    }
    let f = |t: T| set.radius * linf(t) + t * set.eps * dnorm;
    // convex in t; beyond t_hi the linear term alone exceeds f(0)
    let (mut lo, mut hi) = (T::zero(), ub0 / (set.eps * dnorm));
    let g = T::lit(0.381_966_011_250_105_1);
    let mut a = lo + g * (hi - lo);
    let mut b = hi - g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..120 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = lo + g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = hi - g * (hi - lo);
            fb = f(b);
        }
    }
    ub0.min(fa).min(fb).min(f(lo)).min(f(hi))
}

fn certificate<T: Real>(set: &FeasibleSet<'_, T>, xi: &[T], candidates: &[&[T]]) -> T {
    let mut ub = set.radius * xi.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    for c in candidates {
        ub = ub.min(upper_bound_along(set, xi, c));
    }
    ub
}

/// Maximizes `⟨θ, ξ⟩` over the ellipsoid–ℓ1 intersection.
///
/// Closed-form answers are tried first (ℓ1 vertex inside the ellipsoid,
/// ellipsoid maximizer inside the ℓ1 ball). Otherwise the configured solver
/// runs until the dual certificate closes to `tol` (absolute); if it does not,
/// the call fails.
pub fn sup_base_process<T: Real>(
    geometry: &Geometry<T>,
    xi: &[T],
    eps: T,
    radius: T,
    tol: T,
) -> Result<SupSolution<T>> {
    sup_base_process_with(geometry, xi, eps, radius, tol, SupOptions::default())
}

pub fn sup_base_process_with<T: Real>(
    geometry: &Geometry<T>,
    xi: &[T],
    eps: T,
    radius: T,
    tol: T,
    opts: SupOptions,
) -> Result<SupSolution<T>> {
    let m = geometry.dim();
    if xi.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: xi.len() });
    }
    if !(eps > T::zero()) || !(radius > T::zero()) || !(tol > T::zero()) {
        return Err(invalid("sup_base_process needs eps > 0, M > 0, tol > 0"));
    }
    let set = FeasibleSet { geometry, eps, radius };
    let xmax = xi.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    if xmax == T::zero() {
        return Ok(SupSolution { value: T::zero(), theta: vec![T::zero(); m], upper_bound: T::zero(), iterations: 0 });
    }

    // ℓ1 vertex: optimal whenever it already satisfies the ellipsoid
    let kstar = (0..m).fold(0, |b, k| if xi[k].abs() > xi[b].abs() { k } else { b });
    let mut vertex = vec![T::zero(); m];
    vertex[kstar] = radius * xi[kstar].signum();
    if geometry.ellipsoid_norm(&vertex) <= eps {
        let value = dot(&vertex, xi);
        return Ok(SupSolution { value, theta: vertex, upper_bound: value, iterations: 0 });
    }

    // ellipsoid-only maximizer ε·Σ⁺ξ/‖Σ⁺ξ‖_Σ, in the eigenbasis; infinite if ξ leaves the range
    let c = geometry.eigen.to_basis(xi);
    let top = geometry.eigen.values.iter().fold(T::zero(), |a, &b| a.max(b));
    let mut coords = vec![T::zero(); m];
    let mut in_range = true;
    for ((&ck, &lk), out) in c.iter().zip(&geometry.eigen.values).zip(coords.iter_mut()) {
        if lk > T::zero() {
            *out = ck / lk;
        } else if ck.abs() > T::epsilon().sqrt() * xmax * top.max(T::one()) {
            in_range = false;
        }
    }
    let mut starts: Vec<Vec<T>> = vec![set.pull_inside(&vertex)];
    let mut dual_dirs: Vec<Vec<T>> = Vec::new();
    if in_range {
        let u = geometry.eigen.from_basis(&coords);
        let un = geometry.ellipsoid_norm(&u);
        if un > T::zero() {
            let e: Vec<T> = u.iter().map(|&v| v * eps / un).collect();
            if ell1_norm(&e) <= radius {
                let value = dot(&e, xi);
                let ub = certificate(&set, xi, &[&e]).max(value);
                if ub - value <= tol {
                    return Ok(SupSolution { value, theta: e, upper_bound: ub, iterations: 0 });
                }
            }
            starts.push(set.pull_inside(&e));
            dual_dirs.push(u);
        }
    }

    match opts.method {
        SupMethod::Barrier => barrier(&set, xi, &dual_dirs, tol, opts),
        SupMethod::ProjectedGradient => projected_gradient(&set, xi, starts, &dual_dirs, tol, opts),
    }
}

fn projected_gradient<T: Real>(
    set: &FeasibleSet<'_, T>,
    xi: &[T],
    starts: Vec<Vec<T>>,
    dual_dirs: &[Vec<T>],
    tol: T,
    opts: SupOptions,
) -> Result<SupSolution<T>> {
    let radius = set.radius;
    let xnorm = dot(xi, xi).sqrt();
    let ptol = T::lit(1e-3) * tol / (radius * xnorm).max(T::min_positive_value());
    let ptol = ptol.max(T::epsilon() * T::lit(16.0));
    let mut best_val = T::neg_infinity();
    let mut best = starts[0].clone();
    let mut ub = T::infinity();
    let mut iters = 0;
    for start in starts {
        let mut theta = start;
        let mut eta = radius / xnorm;
        for _ in 0..opts.max_outer {
            iters += 1;
            let z: Vec<T> = theta.iter().zip(xi).map(|(&t, &x)| t + eta * x).collect();
            theta = set.project(&z, opts.max_inner, ptol);
            let val = dot(&theta, xi);
            if val > best_val {
                best_val = val;
                best = theta.clone();
            }
            let mut dirs: Vec<&[T]> = vec![&theta];
            dirs.extend(dual_dirs.iter().map(|d| d.as_slice()));
            ub = ub.min(certificate(set, xi, &dirs));
            if ub - best_val <= tol {
                return Ok(SupSolution { value: best_val, theta: best, upper_bound: ub.max(best_val), iterations: iters });
            }
            eta = eta * T::lit(1.5);
        }
    }
    Err(Error::NonConvergence(format!(
        "base-process supremum: certificate gap {} above tol {} after {iters} iterations",
        (ub - best_val).f64(),
        tol.f64()
    )))
}

/// Barrier method for `min −t⟨ξ,θ⟩ − Σ log(u_k ∓ θ_k) − log(M − Σu) − log(ε² − θᵀΣθ)`.
///
/// The `u` block is eliminated, leaving an `m × m` Newton system
/// `diag(4/(a²+b²)) + 2Σ/g + 4ccᵀ/g² + eeᵀ/(r² + Σh)` with `a = u − θ`,
/// `b = u + θ`, `c = Σθ`, `e = (a² − b²)/(a² + b²)`, `h = a²b²/(a² + b²)`.
/// Along the central path `w = 2θ/(t g)` is the ellipsoid multiplier and feeds
/// the certificate.
fn barrier<T: Real>(
    set: &FeasibleSet<'_, T>,
    xi_t: &[T],
    dual_dirs: &[Vec<T>],
    tol_t: T,
    opts: SupOptions,
) -> Result<SupSolution<T>> {
    let m = xi_t.len();
    let sigma: Vec<f64> = set.geometry.gram.data.iter().map(|v| v.f64()).collect();
    let xi: Vec<f64> = xi_t.iter().map(|v| v.f64()).collect();
    let eps2 = set.eps.f64().powi(2);
    let big_m = set.radius.f64();
    let tol = tol_t.f64();
    let sig_mul = |x: &[f64]| -> Vec<f64> { (0..m).map(|i| dot(&sigma[i * m..(i + 1) * m], x)).collect() };
    let xmax = xi.iter().fold(0.0f64, |a, &x| a.max(x.abs()));

    let mut theta = vec![0.0f64; m];
    let mut u = vec![big_m / (2.0 * m as f64); m];
    let ncons = (2 * m + 2) as f64;
    let mut t = ncons / (big_m * xmax);
    let mut best = (f64::NEG_INFINITY, theta.clone());
    let mut ub = f64::INFINITY;
    let mut iters = 0;

    let objective = |t: f64, th: &[f64], u: &[f64]| -> f64 {
        let mut f = -t * dot(&xi, th);
        let mut su = 0.0;
        for k in 0..m {
            let (a, b) = (u[k] - th[k], u[k] + th[k]);
            if !(a > 0.0 && b > 0.0) {
                return f64::INFINITY;
            }
            f -= a.ln() + b.ln();
            su += u[k];
        }
        let r = big_m - su;
        let g = eps2 - dot(th, &sig_mul(th));
        if !(r > 0.0 && g > 0.0) {
            return f64::INFINITY;
        }
        f - r.ln() - g.ln()
    };

    for _stage in 0..opts.max_outer {
        for _ in 0..opts.max_inner {
            iters += 1;
            let c = sig_mul(&theta);
            let g = eps2 - dot(&theta, &c);
            let r = big_m - u.iter().sum::<f64>();
            let mut gth = vec![0.0; m];
            let mut gu = vec![0.0; m];
            let mut hk = vec![0.0; m];
            let mut ek = vec![0.0; m];
            let mut s = crate::linalg::SymMatrix { dim: m, data: vec![0.0f64; m * m] };
            for k in 0..m {
                let (a, b) = (u[k] - theta[k], u[k] + theta[k]);
                gth[k] = -t * xi[k] + 1.0 / a - 1.0 / b + 2.0 * c[k] / g;
                gu[k] = -1.0 / a - 1.0 / b + 1.0 / r;
                let (a2, b2) = (a * a, b * b);
                hk[k] = a2 * b2 / (a2 + b2);
                ek[k] = (a2 - b2) / (a2 + b2);
            }
            let den = r * r + hk.iter().sum::<f64>();
            for i in 0..m {
                for j in 0..m {
                    let mut v = 2.0 * sigma[i * m + j] / g + 4.0 * c[i] * c[j] / (g * g) + ek[i] * ek[j] / den;
                    if i == j {
                        let (a, b) = (u[i] - theta[i], u[i] + theta[i]);
                        v += 4.0 / (a * a + b * b);
                    }
                    s.data[i * m + j] = v;
                }
            }
            // rhs = −gθ + D2 H_uu⁻¹ gu, with D2 H_uu⁻¹ v = e∘v − e (hᵀv)/den scaled by 1/h
            let hg: f64 = hk.iter().zip(&gu).map(|(h, g)| h * g).sum();
            let rhs: Vec<f64> = (0..m).map(|k| -gth[k] + ek[k] * gu[k] - ek[k] * hg / den).collect();
            let dth = crate::linalg::spd_solve(&s, &rhs)
                .ok_or_else(|| Error::NonConvergence("base-process barrier: singular Newton system".into()))?;
            // du = h∘w − h(hᵀw)/den, w = −gu − d2∘dθ, h∘d2 = e
            let hw: Vec<f64> = (0..m).map(|k| -hk[k] * gu[k] - ek[k] * dth[k]).collect();
            let sum_hw: f64 = hw.iter().sum();
            let du: Vec<f64> = (0..m).map(|k| hw[k] - hk[k] * sum_hw / den).collect();
            let dec2 = -(dot(&gth, &dth) + dot(&gu, &du));
            if dec2 / 2.0 <= 1e-10 {
                break;
            }
            let f0 = objective(t, &theta, &u);
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let th2: Vec<f64> = theta.iter().zip(&dth).map(|(x, d)| x + alpha * d).collect();
                let u2: Vec<f64> = u.iter().zip(&du).map(|(x, d)| x + alpha * d).collect();
                let f1 = objective(t, &th2, &u2);
                if f1.is_finite() && f1 <= f0 - 0.25 * alpha * dec2 {
                    theta = th2;
                    u = u2;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let val = dot(&xi, &theta);
        if val > best.0 {
            best = (val, theta.clone());
        }
        let g = eps2 - dot(&theta, &sig_mul(&theta));
        let w: Vec<T> = theta.iter().map(|&v| T::lit(2.0 * v / (t * g))).collect();
        let th_t: Vec<T> = theta.iter().map(|&v| T::lit(v)).collect();
        let mut dirs: Vec<&[T]> = vec![&w, &th_t];
        dirs.extend(dual_dirs.iter().map(|d| d.as_slice()));
        ub = ub.min(certificate(set, xi_t, &dirs).f64());
        if ub - best.0 <= tol {
            break;
        }
        t *= 8.0;
    }
    let theta_t = set.pull_inside(&best.1.iter().map(|&v| T::lit(v)).collect::<Vec<_>>());
    let value = dot(&theta_t, xi_t);
    let ub_t = T::lit(ub).max(value);
    if ub_t - value <= tol_t {
        Ok(SupSolution { value, theta: theta_t, upper_bound: ub_t, iterations: iters })
    } else {
        Err(Error::NonConvergence(format!(
            "base-process supremum: certificate gap {} above tol {tol} after {iters} Newton steps",
            ub - best.0
        )))
    }
}

/// Dense direction-grid oracle for `m ≤ 3`: every boundary point of the set is
/// `ρ(u)·u` with `ρ(u) = min(ε/‖u‖_Σ, M/‖u‖₁)`.
///
/// `steps` is the number of grid cells per angle; the result is refined
/// locally around the best cell until the angular step drops below `1e-10`.
pub fn brute_force_sup(gram: &crate::linalg::SymMatrix<f64>, xi: &[f64], eps: f64, radius: f64, steps: usize) -> Result<f64> {
    let m = gram.dim;
    let value = |u: &[f64]| -> f64 {
        let q = gram.quad_form(u).max(0.0).sqrt();
        let l1: f64 = u.iter().map(|v| v.abs()).sum();
        let rho = if q > 0.0 { (eps / q).min(radius / l1) } else { radius / l1 };
        rho * dot(u, xi)
    };
    let pi = std::f64::consts::PI;
    match m {
        1 => Ok(value(&[1.0]).max(value(&[-1.0]))),
        2 => {
            let f = |phi: f64| value(&[phi.cos(), phi.sin()]);
            let mut best = (f64::NEG_INFINITY, 0.0);
            let h = 2.0 * pi / steps as f64;
            for i in 0..steps {
                let phi = i as f64 * h;
                let v = f(phi);
                if v > best.0 {
                    best = (v, phi);
                }
            }
            let (mut c, mut h) = (best.1, h);
            while h > 1e-10 {
                for j in -20..=20 {
                    let phi = c + j as f64 * h / 10.0;
                    let v = f(phi);
                    if v > best.0 {
                        best = (v, phi);
                    }
                }
                c = best.1;
                h /= 10.0;
            }
            Ok(best.0)
        }
        3 => {
            let f = |a: f64, b: f64| value(&[b.sin() * a.cos(), b.sin() * a.sin(), b.cos()]);
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            let ha = 2.0 * pi / steps as f64;
            let hb = pi / steps as f64;
            for i in 0..steps {
                for j in 0..=steps {
                    let (a, b) = (i as f64 * ha, j as f64 * hb);
                    let v = f(a, b);
                    if v > best.0 {
                        best = (v, a, b);
                    }
                }
            }
            let mut h = ha.max(hb);
            while h > 1e-10 {
                let (_, ca, cb) = best;
                for i in -10..=10 {
                    for j in -10..=10 {
                        let (a, b) = (ca + i as f64 * h / 5.0, cb + j as f64 * h / 5.0);
                        let v = f(a, b);
                        if v > best.0 {
                            best = (v, a, b);
                        }
                    }
                }
                h /= 5.0;
            }
            Ok(best.0)
        }
        _ => Err(invalid("brute-force supremum oracle supports m ≤ 3 only")),
    }
}
