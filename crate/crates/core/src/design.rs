//! Base-function systems evaluated on a fixed design.
//!
//! A [`FunctionSystem`] stores `ψ_k(x_i)` row-major by base function: row `k`
//! holds the `n` values of `ψ_k` at the design points. Raw design points are
//! never stored.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::SymMatrix;
use crate::mc;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSystem<T> {
    m: usize,
    n: usize,
    values: Vec<T>,
}

impl<T: Real> FunctionSystem<T> {
    /// Builds a system from `m` rows of equal length `n`.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Empty("function system needs at least one base function"));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::Empty("function system needs at least one design point"));
        }
        let mut values = Vec::with_capacity(m * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid("function system entries must be finite"));
            }
            values.extend(row);
        }
        Ok(Self { m, n, values })
    }

    pub fn from_row_major(m: usize, n: usize, values: Vec<T>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Empty("function system needs m >= 1 and n >= 1"));
        }
        if values.len() != m * n {
            return Err(Error::DimensionMismatch { expected: m * n, got: values.len() });
        }
        Ok(Self { m, n, values })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        &self.values[k * self.n..(k + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> T {
        self.values[k * self.n + i]
    }

    /// `f_θ(x_i) = Σ_k θ_k ψ_k(x_i)` for every design point.
    pub fn evaluate(&self, theta: &CoefVector<T>) -> Result<Vec<T>> {
        self.evaluate_slice(theta.as_slice())
    }

    pub fn evaluate_slice(&self, theta: &[T]) -> Result<Vec<T>> {
        if theta.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: theta.len() });
        }
        let mut out = vec![T::zero(); self.n];
        for (k, &tk) in theta.iter().enumerate() {
            if tk == T::zero() {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(self.row(k)) {
                *o = *o + tk * v;
            }
        }
        Ok(out)
    }

    /// `(1/n) Σ_i ψ_k(x_i) w_i` for every `k`.
    pub fn correlate(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: w.len() });
        }
        let nn = T::from_count(self.n);
        Ok((0..self.m).map(|k| crate::scalar::dot(self.row(k), w) / nn).collect())
    }

    /// Gram matrix `Σ_kl = (1/n) Σ_i ψ_k(x_i) ψ_l(x_i)`.
    pub fn gram(&self) -> SymMatrix<T> {
        let mut g = SymMatrix::zeros(self.m);
        let nn = T::from_count(self.n);
        for k in 0..self.m {
            for l in k..self.m {
                let v = crate::scalar::dot(self.row(k), self.row(l)) / nn;
                g.set(k, l, v);
                g.set(l, k, v);
            }
        }
        g
    }

    /// `‖ψ_k − ψ_l‖_n`
    pub fn row_distance(&self, k: usize, l: usize) -> T {
        let ss: T = self.row(k).iter().zip(self.row(l)).map(|(&a, &b)| (a - b) * (a - b)).sum();
        (ss / T::from_count(self.n)).sqrt()
    }

    pub fn row_norm(&self, k: usize) -> T {
        empirical_norm(self.row(k)).expect("rows are non-empty")
    }

    /// Design points grouped by identical columns `(ψ_1(x_i), …, ψ_m(x_i))`.
    pub fn design_groups(&self) -> DesignGroups<T> {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut columns: Vec<Vec<T>> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.n {
            let col: Vec<T> = (0..self.m).map(|k| self.get(k, i)).collect();
            let key: Vec<u64> = col.iter().map(|v| (*v + T::zero()).f64().to_bits()).collect();
            match index.get(&key) {
                Some(&g) => members[g].push(i),
                None => {
                    index.insert(key, columns.len());
                    columns.push(col);
                    members.push(vec![i]);
                }
            }
        }
        let mut group_of = vec![0; self.n];
        for (g, mem) in members.iter().enumerate() {
            for &i in mem {
                group_of[i] = g;
            }
        }
        DesignGroups { columns, members, group_of }
    }

    /// Writes the CSV interchange format: a first line `m,n` with the
    /// dimensions, then `m` rows of `n` entries. Entries use the shortest
    /// representation that parses back to the identical value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},{}", self.m, self.n)?;
        for k in 0..self.m {
            let line: Vec<String> = self.row(k).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("missing m,n header"))??;
        let dims: Vec<&str> = header.trim().split(',').collect();
        if dims.len() != 2 {
            return Err(Error::Parse(format!("header must be `m,n`, got `{header}`")));
        }
        let parse_dim = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("bad dimension `{s}`: {e}")))
        };
        let (m, n) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        let mut rows = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<T>().map_err(|_| Error::Parse(format!("bad entry `{s}`"))))
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        if rows.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: rows.len() });
        }
        let sys = Self::from_rows(rows)?;
        if sys.n != n {
            return Err(Error::DimensionMismatch { expected: n, got: sys.n });
        }
        Ok(sys)
    }
}

/// Partition of the design points into classes with identical base-function values.
#[derive(Debug, Clone)]
pub struct DesignGroups<T> {
    /// Shared column `(ψ_1(x), …, ψ_m(x))` of each group.
    pub columns: Vec<Vec<T>>,
    /// Design indices in each group, increasing.
    pub members: Vec<Vec<usize>>,
    pub group_of: Vec<usize>,
}

impl<T: Real> DesignGroups<T> {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Value of `f_θ` on each group.
    pub fn evaluate(&self, theta: &[T]) -> Vec<T> {
        self.columns.iter().map(|c| crate::scalar::dot(c, theta)).collect()
    }
}

/// Coefficient vector `θ ∈ R^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefVector<T>(pub Vec<T>);

impl<T: Real> CoefVector<T> {
    pub fn zeros(m: usize) -> Self {
        Self(vec![T::zero(); m])
    }

    pub fn unit(m: usize, k: usize) -> Self {
        let mut v = vec![T::zero(); m];
        v[k] = T::one();
        Self(v)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ell1_norm(&self) -> T {
        ell1_norm(&self.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }
}

impl<T> From<Vec<T>> for CoefVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// `sqrt((1/n) Σ f_i²)`
pub fn empirical_norm<T: Real>(f: &[T]) -> Result<T> {
    if f.is_empty() {
        return Err(Error::Empty("empirical norm of an empty sequence"));
    }
    let ss: T = f.iter().map(|&v| v * v).sum();
    Ok((ss / T::from_count(f.len())).sqrt())
}

/// `I(θ) = Σ |θ_k|`
pub fn ell1_norm<T: Real>(theta: &[T]) -> T {
    theta.iter().map(|v| v.abs()).sum()
}

/// Indicator ("total variation") system: design `x_i = i/n`, `ψ_k(x) = 1{x ≥ k/m}`
/// for `i = 1..n`, `k = 1..m`.
pub fn build_tv_system<T: Real>(n: usize, m: usize) -> Result<FunctionSystem<T>> {
    if m < 2 || n < m {
        return Err(invalid(format!("tv system needs m >= 2 and n >= m, got n={n}, m={m}")));
    }
    let mut values = Vec::with_capacity(m * n);
    for k in 1..=m {
        for i in 1..=n {
            // i/n >= k/m, compared exactly in integers
            values.push(if i * m >= k * n { T::one() } else { T::zero() });
        }
    }
    FunctionSystem::from_row_major(m, n, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupNormCheck<T> {
    pub holds: bool,
    /// `(k, i)` of the entry with the largest absolute value.
    pub worst_index: (usize, usize),
    pub worst_value: T,
}

/// Checks `max_{k,i} |ψ_k(x_i)| ≤ 1`.
pub fn validate_sup_norm<T: Real>(system: &FunctionSystem<T>) -> SupNormCheck<T> {
    let mut worst = (0, 0);
    let mut worst_value = T::zero();
    for k in 0..system.m() {
        for (i, &v) in system.row(k).iter().enumerate() {
            if v.abs() > worst_value.abs() {
                worst = (k, i);
                worst_value = v;
            }
        }
    }
    SupNormCheck { holds: worst_value.abs() <= T::one(), worst_index: worst, worst_value }
}

/// Law of the responses around `f*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseFamily {
    /// `Y_i = f*(x_i) + U_i`, `U_i ~ Uniform(−b, b)`.
    Uniform { half_width: f64 },
    /// `Y_i ∈ {−1, +1}` with `P(Y_i = 1) = 1 / (1 + exp(−f*(x_i)))`.
    BernoulliLogit,
}

/// Synthetic fixed-design instance with a constructively chosen target.
#[derive(Debug, Clone)]
pub struct SyntheticInstance<T> {
    pub system: FunctionSystem<T>,
    pub theta_star: CoefVector<T>,
    pub noise: NoiseFamily,
    pub seed: u64,
}

impl<T: Real> SyntheticInstance<T> {
    pub fn new(system: FunctionSystem<T>, theta_star: CoefVector<T>, noise: NoiseFamily, seed: u64) -> Result<Self> {
        if theta_star.len() != system.m() {
            return Err(Error::DimensionMismatch { expected: system.m(), got: theta_star.len() });
        }
        if let NoiseFamily::Uniform { half_width } = noise {
            if !(half_width > 0.0) {
                return Err(invalid("uniform noise half-width must be positive"));
            }
        }
        Ok(Self { system, theta_star, noise, seed })
    }

    pub fn f_star(&self) -> Vec<T> {
        self.system.evaluate(&self.theta_star).expect("lengths checked at construction")
    }

    /// Responses for replication `index` of this instance.
    pub fn generate(&self, index: u64) -> Vec<T> {
        let mut rng = mc::rng_for(self.seed, 0x5eed_da7a, index);
        let fs = self.f_star();
        match self.noise {
            NoiseFamily::Uniform { half_width } => fs
                .iter()
                .map(|&f| f + T::lit(half_width * (2.0 * rng.gen::<f64>() - 1.0)))
                .collect(),
            NoiseFamily::BernoulliLogit => fs
                .iter()
                .map(|&f| {
                    let p = 1.0 / (1.0 + (-f.f64()).exp());
                    if rng.gen::<f64>() < p {
                        T::one()
                    } else {
                        -T::one()
                    }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv() -> FunctionSystem<f64> {
        build_tv_system(8, 4).unwrap()
    }

    #[test]
    fn evaluate_unit_and_zero() {
        let s = tv();
        for k in 0..4 {
            assert_eq!(s.evaluate(&CoefVector::unit(4, k)).unwrap(), s.row(k).to_vec());
        }
        assert!(s.evaluate(&CoefVector::zeros(4)).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(
            s.evaluate(&CoefVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn evaluate_tv_pair() {
        let f = tv().evaluate(&CoefVector(vec![1.0, 1.0, 0.0, 0.0])).unwrap();
        // design index i = 4 (1-based)
        assert_eq!(f[3], 2.0);
    }

    #[test]
    fn empirical_norm_cases() {
        assert!((empirical_norm(&[-3.0f64; 5]).unwrap() - 3.0).abs() < 1e-15);
        assert!((empirical_norm(&[3.0, 4.0]).unwrap() - (12.5f64).sqrt()).abs() < 1e-15);
        assert!((tv().row_norm(0) - (7.0f64 / 8.0).sqrt()).abs() < 1e-15);
        assert!(empirical_norm::<f64>(&[]).is_err());
    }

    #[test]
    fn ell1_cases() {
        assert_eq!(ell1_norm(&[1.0, -2.0, 3.0]), 6.0);
        assert_eq!(ell1_norm(&[0.0; 4]), 0.0);
        assert_eq!(CoefVector::<f64>::unit(5, 2).ell1_norm(), 1.0);
    }

    #[test]
    fn gram_cases() {
        let g = tv().gram();
        assert!((g.get(0, 1) - 5.0 / 8.0).abs() < 1e-15);
        assert_eq!(g.get(0, 1), g.get(1, 0));

        let orth = FunctionSystem::from_rows(vec![vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]]).unwrap();
        let go = orth.gram();
        assert_eq!(go.data, vec![1.0, 0.0, 0.0, 1.0]);

        let dup = FunctionSystem::from_rows(vec![vec![0.5, 1.0, 0.0], vec![0.5, 1.0, 0.0], vec![1.0, 0.0, 1.0]]).unwrap();
        let gd = dup.gram();
        assert_eq!(gd.get(0, 0), gd.get(1, 1));
        assert_eq!(gd.get(0, 1), gd.get(0, 0));
        assert_eq!(gd.get(0, 2), gd.get(1, 2));
    }

    #[test]
    fn tv_structure() {
        let s = tv();
        for i in 1..=8 {
            assert_eq!(s.get(1, i - 1) == 1.0, i >= 4);
        }
        assert!((s.row_distance(0, 1) - 0.5).abs() < 1e-15);
        for (n, m) in [(8, 4), (10, 3), (37, 5), (100, 100)] {
            let s: FunctionSystem<f64> = build_tv_system(n, m).unwrap();
            let last = s.row(m - 1);
            assert_eq!(last.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(last[n - 1], 1.0);
        }
        assert!(build_tv_system::<f64>(3, 4).is_err());
        assert!(build_tv_system::<f64>(3, 1).is_err());
    }

    #[test]
    fn sup_norm_at_most_one() {
        let z = FunctionSystem::from_rows(vec![vec![0.0; 3]; 2]).unwrap();
        assert!(validate_sup_norm(&z).holds);
        let mut rows = vec![vec![0.5; 3]; 2];
        rows[1][2] = 1.001;
        let c = validate_sup_norm(&FunctionSystem::from_rows(rows).unwrap());
        assert!(!c.holds);
        assert_eq!(c.worst_index, (1, 2));
        assert!(validate_sup_norm(&tv()).holds);
    }

    #[test]
    fn csv_round_trip() {
        let s = FunctionSystem::from_rows(vec![
            vec![0.1, -1.0 / 3.0, 1e-300],
            vec![std::f64::consts::PI / 4.0, 0.0, -0.999_999_999_999_999_9],
        ])
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("2,3\n"));
        let back = FunctionSystem::<f64>::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn groups_of_tv() {
        let s: FunctionSystem<f64> = build_tv_system(100, 10).unwrap();
        let g = s.design_groups();
        // points below 1/m form one extra group
        assert_eq!(g.len(), 11);
        let theta: Vec<f64> = (0..10).map(|k| k as f64 * 0.1 - 0.3).collect();
        let full = s.evaluate_slice(&theta).unwrap();
        let grouped = g.evaluate(&theta);
        for i in 0..100 {
            assert_eq!(full[i], grouped[g.group_of[i]]);
        }
    }

    #[test]
    fn f32_system() {
        let s: FunctionSystem<f32> = build_tv_system(8, 4).unwrap();
        assert!((s.gram().get(0, 1) - 0.625f32).abs() < 1e-7);
    }
}
