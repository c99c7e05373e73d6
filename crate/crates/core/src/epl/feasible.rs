//! The constraint set `{θ : θᵀΣθ ≤ ε², ‖θ‖₁ ≤ M}` and Euclidean projections onto it.

use crate::linalg::{sym_eigen, SymEigen, SymMatrix};
use crate::scalar::{dot, Real};

/// Gram matrix with its eigen-decomposition, shared by every `(ε, M)` query
/// on the same system.
#[derive(Debug, Clone)]
pub struct Geometry<T> {
    pub gram: SymMatrix<T>,
    pub eigen: SymEigen<T>,
}

impl<T: Real> Geometry<T> {
    pub fn new(gram: SymMatrix<T>) -> Self {
        let mut eigen = sym_eigen(&gram);
        let top = eigen.values.iter().fold(T::zero(), |a, &b| a.max(b));
        let floor = top * T::epsilon() * T::from_count(gram.dim.max(1)) * T::lit(4.0);
        for v in eigen.values.iter_mut() {
            if *v < floor {
                *v = T::zero();
            }
        }
        Self { gram, eigen }
    }

    pub fn dim(&self) -> usize {
        self.gram.dim
    }

    /// `‖f_θ‖_n = sqrt(θᵀΣθ)`
    pub fn ellipsoid_norm(&self, theta: &[T]) -> T {
        self.gram.quad_form(theta).max(T::zero()).sqrt()
    }

    /// Euclidean projection onto `{θᵀΣθ ≤ ε²}`.
    ///
    /// In the eigenbasis the projection is `c_i / (1 + ν λ_i)`; `ν ≥ 0` solves
    /// `Σ λ_i c_i² / (1 + ν λ_i)² = ε²`. Directions with zero eigenvalue are
    /// unconstrained.
    pub fn project_ellipsoid(&self, z: &[T], eps: T) -> Vec<T> {
        let c = self.eigen.to_basis(z);
        let lam = &self.eigen.values;
        let eps2 = eps * eps;
        let q = |nu: T| -> (T, T) {
            let mut val = T::zero();
            let mut der = T::zero();
            for (&ci, &li) in c.iter().zip(lam) {
                if li == T::zero() {
                    continue;
                }
                let d = T::one() + nu * li;
                let t = li * ci * ci / (d * d);
                val = val + t;
                der = der - T::lit(2.0) * t * li / d;
            }
            (val, der)
        };
        let (q0, _) = q(T::zero());
        if q0 <= eps2 {
            return z.to_vec();
        }
        // φ(ν) = q(ν) − ε² is convex and decreasing: Newton from the left is monotone.
        let mut nu = T::zero();
        for _ in 0..200 {
            let (val, der) = q(nu);
            let phi = val - eps2;
            if phi <= eps2 * T::epsilon() * T::lit(8.0) || der == T::zero() {
                break;
            }
            let step = -phi / der;
            nu = nu + step;
            if step <= nu * T::epsilon() {
                break;
            }
        }
        let coords: Vec<T> = c
            .iter()
            .zip(lam)
            .map(|(&ci, &li)| ci / (T::one() + nu * li))
            .collect();
        let mut out = self.eigen.from_basis(&coords);
        let r = self.ellipsoid_norm(&out);
        if r > eps {
            let f = eps / r;
            out.iter_mut().for_each(|v| *v = *v * f);
        }
        out
    }
}

/// Euclidean projection onto the ℓ1 ball of radius `radius`.
pub fn project_l1<T: Real>(z: &[T], radius: T) -> Vec<T> {
    let norm: T = z.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return z.to_vec();
    }
    let mut u: Vec<T> = z.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cum = T::zero();
    let mut tau = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cum = cum + uj;
        let t = (cum - radius) / T::from_count(j + 1);
        if uj > t {
            tau = t;
        } else {
            break;
        }
    }
    let mut out: Vec<T> = z.iter().map(|&v| v.signum() * (v.abs() - tau).max(T::zero())).collect();
    // rounding can leave the result a hair outside
    let after: T = out.iter().map(|v| v.abs()).sum();
    if after > radius {
        let f = radius / after;
        out.iter_mut().for_each(|v| *v = *v * f);
    }
    out
}

/// Intersection of the ellipsoid `‖f_θ‖_n ≤ ε` and the ℓ1 ball `I(θ) ≤ M`.
#[derive(Debug, Clone, Copy)]
pub struct FeasibleSet<'a, T> {
    pub geometry: &'a Geometry<T>,
    pub eps: T,
    pub radius: T,
}

impl<'a, T: Real> FeasibleSet<'a, T> {
    pub fn contains(&self, theta: &[T], slack: T) -> bool {
        self.geometry.ellipsoid_norm(theta) <= self.eps * (T::one() + slack)
            && crate::design::ell1_norm(theta) <= self.radius * (T::one() + slack)
    }

    /// Shrinks `θ` radially until it is feasible.
    pub fn pull_inside(&self, theta: &[T]) -> Vec<T> {
        let e = self.geometry.ellipsoid_norm(theta);
        let l = crate::design::ell1_norm(theta);
        let mut f = T::one();
        if e > self.eps {
            f = f.min(self.eps / e);
        }
        if l > self.radius {
            f = f.min(self.radius / l);
        }
        theta.iter().map(|&v| v * f).collect()
    }

    /// Dykstra's cyclic corrected projections onto the intersection, followed
    /// by a radial pull so the returned point is exactly feasible.
    pub fn project(&self, z: &[T], max_iter: usize, tol: T) -> Vec<T> {
        if self.contains(z, T::zero()) {
            return z.to_vec();
        }
        let m = z.len();
        let mut x = z.to_vec();
        let mut p = vec![T::zero(); m];
        let mut q = vec![T::zero(); m];
        let scale = dot(z, z).sqrt().max(T::one());
        for _ in 0..max_iter {
            let xp: Vec<T> = x.iter().zip(&p).map(|(&a, &b)| a + b).collect();
            let y = self.geometry.project_ellipsoid(&xp, self.eps);
            for i in 0..m {
                p[i] = xp[i] - y[i];
            }
            let yq: Vec<T> = y.iter().zip(&q).map(|(&a, &b)| a + b).collect();
            let xn = project_l1(&yq, self.radius);
            for i in 0..m {
                q[i] = yq[i] - xn[i];
            }
            let change: T = xn.iter().zip(&x).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
            let split: T = xn.iter().zip(&y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
            x = xn;
            if change <= tol * scale && split <= tol * scale {
                break;
            }
        }
        self.pull_inside(&x)
    }
}
