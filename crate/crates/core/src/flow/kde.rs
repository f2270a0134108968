//! Gaussian KDE of a particle cloud evaluated at the cell centres of a square grid.
//!
//! The 2-D Gaussian factorises, so the unnormalised cell mass is
//! `u[b][a] = (1/N) Σ_i ey[i][b] · ex[i][a]`, a single `R×N · N×R` product.
//! Normalisation constants of the kernel cancel when the cell masses are
//! divided by their total, so they are never computed.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::particles::{ParticleSet, Point};
use crate::divergence::DiscreteDistribution;
use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 256;

/// `R×R` grid over `[xmin, xmax] × [ymin, ymax]`. Cell `k = row·R + col`,
/// rows run along `y`, columns along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bounds: [f64; 4],
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            bounds: [-1.5, 1.5, -1.5, 1.5],
            resolution: 64,
        }
    }
}

impl GridSpec {
    pub fn new(bounds: [f64; 4], resolution: usize) -> Result<Self> {
        let g = Self { bounds, resolution };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let [xmin, xmax, ymin, ymax] = self.bounds;
        if !self.bounds.iter().all(|b| b.is_finite()) || xmax <= xmin || ymax <= ymin {
            return Err(Error::Config(format!("degenerate grid bounds {:?}", self.bounds)));
        }
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&self.resolution) {
            return Err(Error::Config(format!(
                "grid resolution {} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn pitch(&self) -> (f64, f64) {
        let [xmin, xmax, ymin, ymax] = self.bounds;
        let r = self.resolution as f64;
        ((xmax - xmin) / r, (ymax - ymin) / r)
    }

    pub fn x_centers(&self) -> Array1<f64> {
        let (dx, _) = self.pitch();
        Array1::from_iter((0..self.resolution).map(|a| self.bounds[0] + (a as f64 + 0.5) * dx))
    }

    pub fn y_centers(&self) -> Array1<f64> {
        let (_, dy) = self.pitch();
        Array1::from_iter((0..self.resolution).map(|b| self.bounds[2] + (b as f64 + 0.5) * dy))
    }

    /// Centre of cell `(row, col)`.
    pub fn center(&self, row: usize, col: usize) -> Point {
        let (dx, dy) = self.pitch();
        [
            self.bounds[0] + (col as f64 + 0.5) * dx,
            self.bounds[2] + (row as f64 + 0.5) * dy,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub sigma: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { sigma: 0.3 }
    }
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        let k = Self { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("kernel sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Normalised KDE cell masses, flattened row-major.
pub fn kde_on_grid(particles: &ParticleSet, grid: &GridSpec, kernel: &KernelConfig) -> Result<DiscreteDistribution> {
    Ok(GridKde::new(particles, grid, kernel)?.distribution)
}

/// KDE state kept around for the gradient pullback.
pub(crate) struct GridKde {
    ex: Array2<f64>,
    ey: Array2<f64>,
    xc: Array1<f64>,
    yc: Array1<f64>,
    total: f64,
    sigma: f64,
    pub(crate) distribution: DiscreteDistribution,
}

fn factors(coord: impl Iterator<Item = f64>, n: usize, centers: &Array1<f64>, sigma: f64) -> Array2<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut out = Array2::zeros((n, centers.len()));
    for (mut row, x) in out.axis_iter_mut(Axis(0)).zip(coord) {
        for (v, &c) in row.iter_mut().zip(centers) {
            let d = c - x;
            *v = (-d * d * inv).exp();
        }
    }
    out
}

impl GridKde {
    pub(crate) fn new(particles: &ParticleSet, grid: &GridSpec, kernel: &KernelConfig) -> Result<Self> {
        grid.validate()?;
        kernel.validate()?;
        let n = particles.len();
        let xc = grid.x_centers();
        let yc = grid.y_centers();
        let pts = particles.points();
        let ex = factors(pts.iter().map(|p| p[0]), n, &xc, kernel.sigma);
        let ey = factors(pts.iter().map(|p| p[1]), n, &yc, kernel.sigma);
        // rows b (y), columns a (x)
        let mass = ey.t().dot(&ex) / n as f64;
        let total = mass.sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Config(
                "particles carry no kernel mass on the grid; widen bounds or sigma".into(),
            ));
        }
        let weights: Vec<f64> = mass.iter().map(|m| m / total).collect();
        let distribution = DiscreteDistribution::from_mass(weights)?;
        Ok(Self {
            ex,
            ey,
            xc,
            yc,
            total,
            sigma: kernel.sigma,
            distribution,
        })
    }

    /// Chains `∂L/∂p` (per cell) back to `∂L/∂x_i` for every particle.
    ///
    /// With `p = u / S`, `∂L/∂x_i = (1/S) Σ_k (g_k - ḡ) ∂u_k/∂x_i` where
    /// `ḡ = Σ_k g_k p_k`, and `∂u_k/∂x_i = (1/N) φ_ik (c_k - x_i) / σ²`.
    pub(crate) fn pullback(&self, particles: &ParticleSet, cell_grad: &[f64]) -> Vec<Point> {
        let r = self.xc.len();
        let n = particles.len();
        let p = self.distribution.weights();
        let mean: f64 = cell_grad.iter().zip(p).map(|(g, w)| g * w).sum();
        let h = Array2::from_shape_fn((r, r), |(b, a)| cell_grad[b * r + a] - mean);
        // w[i][a] = Σ_b ey[i][b] h[b][a];  v[i][b] = Σ_a ex[i][a] h[b][a]
        let w = self.ey.dot(&h);
        let v = self.ex.dot(&h.t());
        let scale = 1.0 / (self.total * n as f64 * self.sigma * self.sigma);
        particles
            .points()
            .iter()
            .enumerate()
            .map(|(i, pt)| {
                let gx: f64 = (0..r).map(|a| w[[i, a]] * self.ex[[i, a]] * (self.xc[a] - pt[0])).sum();
                let gy: f64 = (0..r).map(|b| v[[i, b]] * self.ey[[i, b]] * (self.yc[b] - pt[1])).sum();
                [scale * gx, scale * gy]
            })
            .collect()
    }
}
