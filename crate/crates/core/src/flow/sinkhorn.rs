//! Entropic optimal-transport cost between two uniform point clouds.
//!
//! Squared-Euclidean ground cost. The duals `(f, g)` are initialised with one
//! exact log-domain half-step each, then refined by scaling iterations on the
//! stabilised kernel `exp((f_i + g_j - C_ij) / reg)`; scalings are absorbed
//! back into the duals whenever they drift past `e^±ABSORB`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::particles::ParticleSet;
use crate::error::{Error, Result};

const ABSORB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinkhornConfig {
    pub reg: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            reg: 0.05,
            max_iter: 500,
            tol: 1e-9,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::Config(format!("sinkhorn reg must be > 0, got {}", self.reg)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("sinkhorn max_iter must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("sinkhorn tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn distance(&self, a: &ParticleSet, b: &ParticleSet) -> Result<f64> {
        sinkhorn_distance(a, b, self.reg, self.max_iter, self.tol)
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct Problem {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    reg: f64,
}

impl Problem {
    fn kernel(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let mut k = vec![0.0; self.n * self.m];
        k.par_chunks_mut(self.m)
            .zip(self.cost.par_chunks(self.m))
            .zip(f.par_iter())
            .for_each(|((row, c), &fi)| {
                for ((kij, &cij), &gj) in row.iter_mut().zip(c).zip(g) {
                    *kij = ((fi + gj - cij) / self.reg).exp();
                }
            });
        k
    }

    fn mul(&self, k: &[f64], v: &[f64]) -> Vec<f64> {
        k.par_chunks(self.m)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn mul_t(&self, k: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (row, &ui) in k.chunks(self.m).zip(u) {
            for (o, &kij) in out.iter_mut().zip(row) {
                *o += kij * ui;
            }
        }
        out
    }
}

/// Entropic-regularised transport cost `⟨Π, C⟩` with uniform marginals.
///
/// Stops when the row-marginal L1 error drops below `tol` or after
/// `max_iter` scaling iterations.
pub fn sinkhorn_distance(a: &ParticleSet, b: &ParticleSet, reg: f64, max_iter: usize, tol: f64) -> Result<f64> {
    SinkhornConfig { reg, max_iter, tol }.validate()?;
    let (n, m) = (a.len(), b.len());
    let cost: Vec<f64> = a
        .points()
        .iter()
        .flat_map(|p| {
            b.points()
                .iter()
                .map(move |q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        })
        .collect();
    let prob = Problem { n, m, cost, reg };
    let log_a = -(n as f64).ln();
    let log_b = -(m as f64).ln();
    let mass_a = 1.0 / n as f64;
    let mass_b = 1.0 / m as f64;

    let g0 = vec![0.0; m];
    let mut f: Vec<f64> = prob
        .cost
        .par_chunks(m)
        .map(|c| reg * (log_a - log_sum_exp(c.iter().zip(&g0).map(|(cij, gj)| (gj - cij) / reg))))
        .collect();
    let mut g: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|j| {
            let col = (0..n).map(|i| (f[i] - prob.cost[i * m + j]) / reg);
            reg * (log_b - log_sum_exp(col))
        })
        .collect();
    if f.iter().chain(&g).any(|x| !x.is_finite()) {
        return Err(Error::SinkhornUnderflow(reg));
    }

    let mut k = prob.kernel(&f, &g);
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    for _ in 0..max_iter {
        let kv = prob.mul(&k, &v);
        let err: f64 = u.iter().zip(&kv).map(|(ui, kvi)| (ui * kvi - mass_a).abs()).sum();
        if err < tol {
            break;
        }
        u = kv.iter().map(|x| mass_a / x).collect();
        let ktu = prob.mul_t(&k, &u);
        v = ktu.iter().map(|x| mass_b / x).collect();

        let drifted = u.iter().chain(&v).any(|s| {
            let l = s.abs().ln().abs();
            l.is_nan() || l >= ABSORB
        });
        if drifted {
            if u.iter().chain(&v).any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::SinkhornUnderflow(reg));
            }
            f.iter_mut().zip(&u).for_each(|(fi, ui)| *fi += reg * ui.ln());
            g.iter_mut().zip(&v).for_each(|(gj, vj)| *gj += reg * vj.ln());
            k = prob.kernel(&f, &g);
            u.iter_mut().for_each(|x| *x = 1.0);
            v.iter_mut().for_each(|x| *x = 1.0);
        }
    }

    let total: f64 = k
        .par_chunks(m)
        .zip(prob.cost.par_chunks(m))
        .zip(u.par_iter())
        .map(|((krow, crow), &ui)| {
            ui * krow
                .iter()
                .zip(crow)
                .zip(&v)
                .map(|((kij, cij), vj)| kij * cij * vj)
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    if !total.is_finite() {
        return Err(Error::SinkhornUnderflow(reg));
    }
    Ok(total.max(0.0))
}
