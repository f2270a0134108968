//! Squared MMD with an RBF kernel `k(x, y) = exp(-|x - y|² / (2σ²))`, sample to sample.

use rayon::prelude::*;

use super::particles::{ParticleSet, Point};

fn rbf(a: Point, b: Point, inv2s2: f64) -> f64 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    (-d2 * inv2s2).exp()
}

/// Mean kernel value over all ordered pairs of `a × b`.
pub fn mean_kernel(a: &ParticleSet, b: &ParticleSet, sigma: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let rows: Vec<f64> = a
        .points()
        .par_iter()
        .map(|&p| b.points().iter().map(|&q| rbf(p, q, inv)).sum())
        .collect();
    rows.iter().sum::<f64>() / (a.len() * b.len()) as f64
}

/// `MMD²(x, y)` given the precomputed `E k(y, y')` term.
pub fn mmd2_with_target_term(x: &ParticleSet, y: &ParticleSet, yy: f64, sigma: f64) -> f64 {
    mean_kernel(x, x, sigma) - 2.0 * mean_kernel(x, y, sigma) + yy
}

pub fn mmd2(x: &ParticleSet, y: &ParticleSet, sigma: f64) -> f64 {
    mmd2_with_target_term(x, y, mean_kernel(y, y, sigma), sigma)
}

/// `∂ MMD²(x, y) / ∂x_i` for every particle of `x`.
pub fn mmd2_gradient(x: &ParticleSet, y: &ParticleSet, sigma: f64) -> Vec<Point> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let s2 = sigma * sigma;
    let n = x.len() as f64;
    let m = y.len() as f64;
    let xs = x.points();
    xs.par_iter()
        .map(|&p| {
            let mut g = [0.0; 2];
            for &q in xs {
                let k = rbf(p, q, inv);
                g[0] -= 2.0 / (n * n) * k * (p[0] - q[0]) / s2;
                g[1] -= 2.0 / (n * n) * k * (p[1] - q[1]) / s2;
            }
            for &q in y.points() {
                let k = rbf(p, q, inv);
                g[0] += 2.0 / (n * m) * k * (p[0] - q[0]) / s2;
                g[1] += 2.0 / (n * m) * k * (p[1] - q[1]) / s2;
            }
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_clouds() {
        let a = ParticleSet::new(vec![[0.0, 0.1], [0.4, -0.3], [1.0, 1.0]]).unwrap();
        assert!(mmd2(&a, &a, 0.3).abs() < 1e-14);
        for g in mmd2_gradient(&a, &a, 0.3) {
            assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = ParticleSet::new(vec![[0.0, 0.1], [0.4, -0.3], [0.2, 0.5]]).unwrap();
        let y = ParticleSet::new(vec![[0.3, 0.3], [-0.1, 0.0]]).unwrap();
        let g = mmd2_gradient(&x, &y, 0.3);
        let h = 1e-6;
        for i in 0..x.len() {
            for c in 0..2 {
                let mut up = x.points().to_vec();
                let mut dn = x.points().to_vec();
                up[i][c] += h;
                dn[i][c] -= h;
                let fd = (mmd2(&ParticleSet::new(up).unwrap(), &y, 0.3)
                    - mmd2(&ParticleSet::new(dn).unwrap(), &y, 0.3))
                    / (2.0 * h);
                assert!((fd - g[i][c]).abs() < 1e-8, "{i},{c}: {fd} vs {}", g[i][c]);
            }
        }
    }
}
