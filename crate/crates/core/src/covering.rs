//! Covering numbers of the dictionary `Ψ = {ψ_k}` under `‖·‖_n`, the
//! polynomial envelope `N(ε) ≤ A ε^{-V}`, and the radius partition used by the
//! sparsification argument.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::design::FunctionSystem;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Pairwise `‖ψ_k − ψ_l‖_n`, computed once per system.
#[derive(Debug, Clone)]
pub struct DistanceTable<T> {
    m: usize,
    d: Vec<T>,
}

impl<T: Real> DistanceTable<T> {
    pub fn new(system: &FunctionSystem<T>) -> Self {
        let m = system.m();
        let rows: Vec<Vec<T>> = (0..m)
            .into_par_iter()
            .map(|k| (0..m).map(|l| if k == l { T::zero() } else { system.row_distance(k, l) }).collect())
            .collect();
        Self { m, d: rows.concat() }
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> T {
        self.d[k * self.m + l]
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn diameter(&self) -> T {
        self.d.iter().fold(T::zero(), |a, &b| a.max(b))
    }
}

/// Greedy net: scan indices in increasing order and open a new center at the
/// lowest index not yet within `eps` of an existing center.
///
/// Centers are pairwise more than `eps` apart, so the count never exceeds the
/// covering number at radius `eps/2`.
pub fn greedy_net<T: Real>(table: &DistanceTable<T>, eps: T) -> Result<Vec<usize>> {
    if !(eps > T::zero()) {
        return Err(invalid("covering radius must be positive"));
    }
    let m = table.m();
    let mut covered = vec![false; m];
    let mut centers = Vec::new();
    for c in 0..m {
        if covered[c] {
            continue;
        }
        centers.push(c);
        for (k, cov) in covered.iter_mut().enumerate() {
            if !*cov && table.get(c, k) <= eps {
                *cov = true;
            }
        }
    }
    Ok(centers)
}

/// `A = max(1, max_grid N̂(ε) ε^V)`
pub fn fit_envelope<T: Real>(points: &[(T, usize)], v: T) -> Result<T> {
    if points.is_empty() {
        return Err(Error::Empty("envelope fit needs at least one grid point"));
    }
    if !(v > T::zero()) {
        return Err(invalid("envelope exponent V must be positive"));
    }
    let mut a = T::one();
    for &(eps, count) in points {
        if !(eps > T::zero()) || count == 0 {
            return Err(invalid("envelope grid needs eps > 0 and counts >= 1"));
        }
        a = a.max(T::from_count(count) * eps.powf(v));
    }
    Ok(a)
}

/// `s = 2/(2+V)`
pub fn smoothness_from_exponent<T: Real>(v: T) -> T {
    T::lit(2.0) / (T::lit(2.0) + v)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoveringReport<T> {
    pub eps_grid: Vec<T>,
    pub counts: Vec<usize>,
    pub v: T,
    pub a: T,
    pub s: T,
}

impl<T: Real> CoveringReport<T> {
    pub fn envelope(&self, eps: T) -> T {
        self.a * eps.powf(-self.v)
    }

    /// CSV with columns `epsilon,count,envelope_value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epsilon", "count", "envelope_value"])?;
        for (&e, &c) in self.eps_grid.iter().zip(&self.counts) {
            wr.write_record([e.to_string(), c.to_string(), self.envelope(e).to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Geometric grid from the diameter down to `16/m` with ratio `1/√2`.
pub fn default_eps_grid<T: Real>(diameter: T, m: usize) -> Vec<T> {
    let floor = T::lit(16.0) / T::from_count(m);
    let ratio = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut grid = vec![diameter];
    let mut e = diameter * ratio;
    while e >= floor && e > T::zero() {
        grid.push(e);
        e = e * ratio;
    }
    grid
}

/// How the envelope exponent is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentChoice<T> {
    Given(T),
    /// Least-squares slope of `log N̂` on `log(1/ε)`, rounded up to the next 0.01.
    Fitted,
}

pub fn covering_report<T: Real>(
    system: &FunctionSystem<T>,
    eps_grid: Option<Vec<T>>,
    exponent: ExponentChoice<T>,
) -> Result<CoveringReport<T>> {
    let table = DistanceTable::new(system);
    covering_report_with(&table, eps_grid, exponent)
}

pub fn covering_report_with<T: Real>(
    table: &DistanceTable<T>,
    eps_grid: Option<Vec<T>>,
    exponent: ExponentChoice<T>,
) -> Result<CoveringReport<T>> {
    let mut grid = match eps_grid {
        Some(g) => g,
        None => {
            let diam = table.diameter();
            if diam == T::zero() {
                vec![T::one()]
            } else {
                default_eps_grid(diam, table.m())
            }
        }
    };
    if grid.is_empty() {
        return Err(Error::Empty("covering grid"));
    }
    grid.sort_by(|a, b| b.partial_cmp(a).expect("finite grid"));
    let counts = grid.iter().map(|&e| greedy_net(table, e).map(|c| c.len())).collect::<Result<Vec<_>>>()?;
    let v = match exponent {
        ExponentChoice::Given(v) => v,
        ExponentChoice::Fitted => {
            let xs: Vec<f64> = grid.iter().map(|e| -e.f64().ln()).collect();
            let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
            let slope = crate::mc::ls_slope(&xs, &ys)
                .map_err(|_| invalid("fitting V needs at least two distinct grid radii; supply V instead"))?;
            T::lit(((slope * 100.0).ceil() / 100.0).max(0.01))
        }
    };
    let pts: Vec<(T, usize)> = grid.iter().copied().zip(counts.iter().copied()).collect();
    let a = fit_envelope(&pts, v)?;
    Ok(CoveringReport { eps_grid: grid, counts, v, a, s: smoothness_from_exponent(v) })
}

/// Cells `V_j` of indices grouped around greedy-net centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition<T> {
    pub radius: T,
    pub cells: Vec<Vec<usize>>,
    pub centers: Vec<usize>,
}

impl<T: Real> Partition<T> {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Largest within-cell distance; at most `2·radius` by construction.
    pub fn max_cell_diameter(&self, table: &DistanceTable<T>) -> T {
        let mut worst = T::zero();
        for cell in &self.cells {
            for (a, &k) in cell.iter().enumerate() {
                for &l in &cell[a + 1..] {
                    worst = worst.max(table.get(k, l));
                }
            }
        }
        worst
    }

    /// Cell index of each base function.
    pub fn cell_of(&self, m: usize) -> Vec<usize> {
        let mut out = vec![0; m];
        for (j, cell) in self.cells.iter().enumerate() {
            for &k in cell {
                out[k] = j;
            }
        }
        out
    }
}

/// Assigns every index to its nearest greedy-net center at `radius`
/// (ties go to the lower center index).
pub fn partition_cells<T: Real>(table: &DistanceTable<T>, radius: T) -> Result<Partition<T>> {
    let centers = greedy_net(table, radius)?;
    let mut cells = vec![Vec::new(); centers.len()];
    for k in 0..table.m() {
        let mut best = 0;
        for (j, &c) in centers.iter().enumerate().skip(1) {
            if table.get(k, c) < table.get(k, centers[best]) {
                best = j;
            }
        }
        cells[best].push(k);
    }
    Ok(Partition { radius, cells, centers })
}
