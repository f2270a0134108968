//! 2-D particle clouds and the shape samplers used as flow endpoints.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type Point = [f64; 2];

/// `N >= 1` finite points in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    points: Vec<Point>,
}

impl ParticleSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("particle set must be nonempty".into()));
        }
        if let Some(i) = points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::Config(format!("particle {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub(crate) fn points_mut(&mut self) -> &mut [Point] {
        &mut self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetShape {
    Heart,
    Ring,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitShape {
    Star,
    Gaussian,
    Uniform,
}

/// Standard deviation of the base `gaussian` shapes (before added noise).
const GAUSSIAN_STD: f64 = 0.25;
const RING_RADIUS: f64 = 0.8;
/// Inner/outer radius ratio of a regular five-pointed star.
const STAR_INNER_RATIO: f64 = 0.381_966_011_250_105_1;

fn heart_raw(t: f64) -> Point {
    let s = t.sin();
    [
        16.0 * s * s * s,
        13.0 * t.cos() - 5.0 * (2.0 * t).cos() - 2.0 * (3.0 * t).cos() - (4.0 * t).cos(),
    ]
}

/// Center and scale mapping the heart curve's bounding box into `[-1, 1]²`.
fn heart_frame() -> (Point, f64) {
    static FRAME: OnceLock<(Point, f64)> = OnceLock::new();
    *FRAME.get_or_init(compute_heart_frame)
}

fn compute_heart_frame() -> (Point, f64) {
    const SAMPLES: usize = 100_000;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..SAMPLES {
        let p = heart_raw(TAU * i as f64 / SAMPLES as f64);
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let half = ((hi[0] - lo[0]).max(hi[1] - lo[1])) / 2.0;
    (center, 1.0 / half)
}

/// Point on the heart curve at parameter `t`, rescaled into `[-1, 1]²`.
pub fn heart_point(t: f64) -> Point {
    let (c, s) = heart_frame();
    heart_point_in(t, c, s)
}

fn heart_point_in(t: f64, center: Point, scale: f64) -> Point {
    let p = heart_raw(t);
    [(p[0] - center[0]) * scale, (p[1] - center[1]) * scale]
}

/// Vertices of the five-pointed star outline, outer radius 1, first tip up.
pub fn star_vertices() -> [Point; 10] {
    let mut v = [[0.0; 2]; 10];
    for (k, vk) in v.iter_mut().enumerate() {
        let r = if k % 2 == 0 { 1.0 } else { STAR_INNER_RATIO };
        let a = FRAC_PI_2 + PI * k as f64 / 5.0;
        *vk = [r * a.cos(), r * a.sin()];
    }
    v
}

/// Gaussian noise truncated at four standard deviations.
fn noise_sample<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 4.0 {
            return scale * z;
        }
    }
}

fn jitter<R: Rng + ?Sized>(rng: &mut R, p: Point, noise: f64) -> Point {
    [p[0] + noise_sample(rng, noise), p[1] + noise_sample(rng, noise)]
}

fn check_request(n: usize, noise: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Config(format!("noise must be >= 0, got {noise}")));
    }
    Ok(())
}

/// Samples the target cloud from the `target` stream of `seed`.
pub fn make_target(shape: TargetShape, n: usize, noise: f64, seed: u64) -> Result<ParticleSet> {
    check_request(n, noise)?;
    let mut rng = rng::stream(seed, rng::TARGET);
    let points = match shape {
        TargetShape::Heart => {
            let (c, s) = heart_frame();
            (0..n)
                .map(|_| {
                    let t = rng.random_range(0.0..TAU);
                    let p = heart_point_in(t, c, s);
                    jitter(&mut rng, p, noise)
                })
                .collect()
        }
        TargetShape::Ring => (0..n)
            .map(|_| {
                let t = rng.random_range(0.0..TAU);
                let p = [RING_RADIUS * t.cos(), RING_RADIUS * t.sin()];
                jitter(&mut rng, p, noise)
            })
            .collect(),
        TargetShape::Gaussian => (0..n)
            .map(|_| {
                let p = [
                    noise_sample(&mut rng, GAUSSIAN_STD),
                    noise_sample(&mut rng, GAUSSIAN_STD),
                ];
                jitter(&mut rng, p, noise)
            })
            .collect(),
    };
    ParticleSet::new(points)
}

/// Samples the initial cloud from the `init` stream of `seed`.
///
/// `star` draws uniformly by arc length along the outline of a regular
/// five-pointed star centred at the origin with its tips on the unit circle.
pub fn make_init(shape: InitShape, n: usize, noise: f64, seed: u64) -> Result<ParticleSet> {
    check_request(n, noise)?;
    let mut rng = rng::stream(seed, rng::INIT);
    let points = match shape {
        InitShape::Star => {
            let v = star_vertices();
            (0..n)
                .map(|_| {
                    // all ten edges have equal length
                    let e = rng.random_range(0..10);
                    let s: f64 = rng.random();
                    let (a, b) = (v[e], v[(e + 1) % 10]);
                    let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    jitter(&mut rng, p, noise)
                })
                .collect()
        }
        InitShape::Gaussian => (0..n)
            .map(|_| {
                let p = [
                    noise_sample(&mut rng, GAUSSIAN_STD),
                    noise_sample(&mut rng, GAUSSIAN_STD),
                ];
                jitter(&mut rng, p, noise)
            })
            .collect(),
        InitShape::Uniform => (0..n)
            .map(|_| {
                let p = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
                jitter(&mut rng, p, noise)
            })
            .collect(),
    };
    ParticleSet::new(points)
}
