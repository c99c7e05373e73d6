//! Primal-dual interior point for the weighted LAD linear program.
//!
//! Dual form: `max yᵀu  s.t.  Aᵀu = 0, |u_j| ≤ w_j`, with slacks
//! `s = w − u`, `t = w + u` and multipliers `z, v ≥ 0` satisfying
//! `y − Aθ = z − v`. Rows of `A` are pooled design columns; optional
//! pseudo-rows `e_k` carry the ℓ1 penalty. Mehrotra predictor-corrector.

use crate::error::{Error, Result};
use crate::linalg::{SpdFactor, SymMatrix};
use crate::scalar::dot;

pub(crate) struct LadData<'a> {
    pub columns: &'a [Vec<f64>],
    pub members: &'a [Vec<usize>],
    pub group_of: &'a [usize],
    pub y: &'a [f64],
    pub m: usize,
}

pub(crate) struct LadSolution {
    pub theta: Vec<f64>,
    /// Dual variables, data rows first then pseudo-rows.
    pub u: Vec<f64>,
    pub iterations: usize,
}

struct Dir {
    dth: Vec<f64>,
    du: Vec<f64>,
    dz: Vec<f64>,
    dv: Vec<f64>,
    ap: f64,
    ad: f64,
}

impl Dir {
    fn new(m: usize, big_n: usize) -> Self {
        Self { dth: vec![0.0; m], du: vec![0.0; big_n], dz: vec![0.0; big_n], dv: vec![0.0; big_n], ap: 1.0, ad: 1.0 }
    }
}

pub(crate) fn solve(data: &LadData<'_>, lambda: f64, tol: f64) -> Result<LadSolution> {
    let m = data.m;
    let n = data.y.len();
    let g_count = data.columns.len();
    let pseudo = if lambda > 0.0 { m } else { 0 };
    let big_n = n + pseudo;
    let w_of = |j: usize| if j < n { 1.0 / n as f64 } else { lambda };
    let y_of = |j: usize| if j < n { data.y[j] } else { 0.0 };

    let mut theta = vec![0.0; m];
    let mut u = vec![0.0; big_n];
    let delta = ((0..big_n).map(|j| y_of(j).abs()).sum::<f64>() / big_n as f64).max(1e-3);
    let mut z: Vec<f64> = (0..big_n).map(|j| y_of(j).max(0.0) + delta).collect();
    let mut v: Vec<f64> = (0..big_n).map(|j| (-y_of(j)).max(0.0) + delta).collect();
    let scale = 1.0 + (0..big_n).fold(0.0f64, |a, j| a.max(y_of(j).abs()));

    let mut s = vec![0.0; big_n];
    let mut t = vec![0.0; big_n];
    let mut rd = vec![0.0; big_n];
    let mut dinv = vec![0.0; big_n];
    let mut q = vec![0.0; big_n];
    let mut aff = Dir::new(m, big_n);
    let mut cor = Dir::new(m, big_n);

    let group_values = |th: &[f64]| -> Vec<f64> { data.columns.iter().map(|c| dot(c, th)).collect() };
    let pooled = |vals: &[f64], out: &mut Vec<f64>| {
        // Aᵀ·vals
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, mem) in data.columns.iter().zip(data.members) {
            let sv: f64 = mem.iter().map(|&i| vals[i]).sum();
            if sv != 0.0 {
                for (o, ck) in out.iter_mut().zip(c) {
                    *o += sv * ck;
                }
            }
        }
        for k in 0..pseudo {
            out[k] += vals[n + k];
        }
    };

    let mut rp = vec![0.0; m];
    for iteration in 1..=300 {
        let fv = group_values(&theta);
        let mut primal = 0.0;
        let mut dual = 0.0;
        let mut comp = 0.0;
        let mut gsum = vec![0.0; g_count];
        for j in 0..big_n {
            let a = if j < n { fv[data.group_of[j]] } else { theta[j - n] };
            let r = y_of(j) - a;
            let w = w_of(j);
            s[j] = w - u[j];
            t[j] = w + u[j];
            rd[j] = -r + z[j] - v[j];
            primal += w * r.abs();
            dual += y_of(j) * u[j];
            comp += z[j] * s[j] + v[j] * t[j];
            dinv[j] = 1.0 / (z[j] / s[j] + v[j] / t[j]);
            if j < n {
                gsum[data.group_of[j]] += dinv[j];
            }
        }
        pooled(&u, &mut rp);
        let feas = rp.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if (primal - dual).abs() <= tol * 1e-3 * (1.0 + primal.abs()) && feas <= tol * 1e-3 * scale {
            return Ok(LadSolution { theta, u, iterations: iteration });
        }
        let mu = comp / (2 * big_n) as f64;

        let mut normal = SymMatrix { dim: m, data: vec![0.0f64; m * m] };
        for (c, &ws) in data.columns.iter().zip(&gsum) {
            for a in 0..m {
                if c[a] == 0.0 {
                    continue;
                }
                let ca = ws * c[a];
                for (nb, &cb) in normal.data[a * m..(a + 1) * m].iter_mut().zip(c) {
                    *nb += ca * cb;
                }
            }
        }
        for k in 0..pseudo {
            normal.data[k * m + k] += dinv[n + k];
        }
        let factor = SpdFactor::new(&normal)
            .ok_or_else(|| Error::NonConvergence("LAD interior point: normal matrix not factorizable".into()))?;

        // complementarity targets: affine (σμ = 0, no second-order term) or corrected
        let direction = |target: Option<(f64, &Dir)>, q: &mut Vec<f64>, out: &mut Dir| {
            let rz = |j: usize| -> (f64, f64) {
                match target {
                    None => (-z[j] * s[j], -v[j] * t[j]),
                    Some((sm, a)) => (
                        sm - z[j] * s[j] + a.du[j] * a.dz[j],
                        sm - v[j] * t[j] - a.du[j] * a.dv[j],
                    ),
                }
            };
            let mut dq = vec![0.0; big_n];
            for j in 0..big_n {
                let (rzs, rvt) = rz(j);
                q[j] = -rd[j] - rzs / s[j] + rvt / t[j];
                dq[j] = dinv[j] * q[j];
            }
            let mut rhs = vec![0.0; m];
            pooled(&dq, &mut rhs);
            for (r, p) in rhs.iter_mut().zip(&rp) {
                *r += p;
            }
            out.dth = factor.solve(&rhs);
            let adv = group_values(&out.dth);
            let (mut ap, mut ad) = (1.0f64, 1.0f64);
            for j in 0..big_n {
                let a = if j < n { adv[data.group_of[j]] } else { out.dth[j - n] };
                let (rzs, rvt) = rz(j);
                let du = dinv[j] * (q[j] - a);
                let dz = (rzs + z[j] * du) / s[j];
                let dv = (rvt - v[j] * du) / t[j];
                out.du[j] = du;
                out.dz[j] = dz;
                out.dv[j] = dv;
                if du > 0.0 {
                    ap = ap.min(s[j] / du);
                } else if du < 0.0 {
                    ap = ap.min(-t[j] / du);
                }
                if dz < 0.0 {
                    ad = ad.min(-z[j] / dz);
                }
                if dv < 0.0 {
                    ad = ad.min(-v[j] / dv);
                }
            }
            out.ap = ap;
            out.ad = ad;
        };

        direction(None, &mut q, &mut aff);
        let mu_aff = (0..big_n)
            .map(|j| {
                (z[j] + aff.ad * aff.dz[j]) * (s[j] - aff.ap * aff.du[j])
                    + (v[j] + aff.ad * aff.dv[j]) * (t[j] + aff.ap * aff.du[j])
            })
            .sum::<f64>()
            / (2 * big_n) as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);
        direction(Some((sigma * mu, &aff)), &mut q, &mut cor);
        let ap = (0.99995 * cor.ap).min(1.0);
        let ad = (0.99995 * cor.ad).min(1.0);
        for j in 0..big_n {
            u[j] += ap * cor.du[j];
            z[j] += ad * cor.dz[j];
            v[j] += ad * cor.dv[j];
        }
        for (t, d) in theta.iter_mut().zip(&cor.dth) {
            *t += ad * d;
        }
    }
    Err(Error::NonConvergence(format!(
        "LAD interior point did not reach the duality-gap tolerance in 300 iterations (lambda = {lambda})"
    )))
}
