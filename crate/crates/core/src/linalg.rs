//! Small dense symmetric linear algebra (m is at most a few hundred).

use crate::scalar::Real;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    pub dim: usize,
    pub data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim).map(|i| crate::scalar::dot(self.row(i), x)).collect()
    }

    /// `xᵀ S x`
    pub fn quad_form(&self, x: &[T]) -> T {
        crate::scalar::dot(x, &self.mul_vec(x))
    }
}

/// Eigen-decomposition `S = Q diag(values) Qᵀ`; column `k` of `Q` is `vectors[k]`.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Real> SymEigen<T> {
    /// Coordinates of `x` in the eigenbasis.
    pub fn to_basis(&self, x: &[T]) -> Vec<T> {
        self.vectors.iter().map(|q| crate::scalar::dot(q, x)).collect()
    }

    pub fn from_basis(&self, c: &[T]) -> Vec<T> {
        let m = self.values.len();
        let mut out = vec![T::zero(); m];
        for (q, &ck) in self.vectors.iter().zip(c) {
            for (o, &qi) in out.iter_mut().zip(q) {
                *o = *o + ck * qi;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigenvalue iteration. Accurate for the small, possibly
/// singular Gram matrices used here.
pub fn sym_eigen<T: Real>(s: &SymMatrix<T>) -> SymEigen<T> {
    let m = s.dim;
    let mut a = s.data.clone();
    let mut v = vec![T::zero(); m * m];
    for i in 0..m {
        v[i * m + i] = T::one();
    }
    let two = T::lit(2.0);
    let scale: T = a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let tiny = T::epsilon() * T::epsilon() * scale.max(T::min_positive_value());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..m {
            for q in (p + 1)..m {
                off = off + a[p * m + q] * a[p * m + q];
            }
        }
        if off.sqrt() <= tiny {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - sn * akq;
                    a[k * m + q] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - sn * aqk;
                    a[q * m + k] = sn * apk + c * aqk;
                }
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - sn * vkq;
                    v[k * m + q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let values: Vec<T> = (0..m).map(|i| a[i * m + i]).collect();
    let vectors: Vec<Vec<T>> = (0..m).map(|k| (0..m).map(|i| v[i * m + k]).collect()).collect();
    SymEigen { values, vectors }
}

/// Solves `S x = b` for symmetric positive definite `S` by Cholesky, adding a
/// diagonal jitter if the factorization breaks down. Returns `None` if even the
/// jittered matrix is not factorizable.
pub fn spd_solve<T: Real>(s: &SymMatrix<T>, b: &[T]) -> Option<Vec<T>> {
    SpdFactor::new(s).map(|f| f.solve(b))
}

/// Cholesky factor `S + jitter·I = L Lᵀ`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct SpdFactor<T> {
    dim: usize,
    l: Vec<T>,
    pub jitter: T,
}

impl<T: Real> SpdFactor<T> {
    pub fn new(s: &SymMatrix<T>) -> Option<Self> {
        let m = s.dim;
        let diag_max = (0..m).fold(T::zero(), |acc, i| acc.max(s.get(i, i).abs()));
        let mut jitter = T::zero();
        for _ in 0..12 {
            if let Some(l) = cholesky(s, jitter) {
                return Some(Self { dim: m, l, jitter });
            }
            jitter = if jitter == T::zero() {
                T::epsilon().sqrt() * diag_max.max(T::one()) * T::lit(1e-4)
            } else {
                jitter * T::lit(100.0)
            };
        }
        None
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        cholesky_solve(&self.l, self.dim, b)
    }
}

fn cholesky<T: Real>(s: &SymMatrix<T>, jitter: T) -> Option<Vec<T>> {
    let m = s.dim;
    let mut l = vec![T::zero(); m * m];
    for j in 0..m {
        let mut d = s.get(j, j) + jitter;
        for k in 0..j {
            d = d - l[j * m + k] * l[j * m + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * m + j] = d;
        for i in (j + 1)..m {
            let mut x = s.get(i, j);
            for k in 0..j {
                x = x - l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = x / d;
        }
    }
    Some(l)
}

fn cholesky_solve<T: Real>(l: &[T], m: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..m {
        let mut x = y[i];
        for k in 0..i {
            x = x - l[i * m + k] * y[k];
        }
        y[i] = x / l[i * m + i];
    }
    for i in (0..m).rev() {
        let mut x = y[i];
        for k in (i + 1)..m {
            x = x - l[k * m + i] * y[k];
        }
        y[i] = x / l[i * m + i];
    }
    y
}
