//! Particle gradient flows toward a target cloud.
//!
//! Grid-based divergences compare the KDE of the moving particles (first
//! argument) with the frozen KDE of the target samples (second argument) on
//! one shared grid. `mmd` works directly on the samples.

pub mod kde;
pub mod mmd;
pub mod particles;
pub mod sinkhorn;

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::divergence::{self as dv, ClampPolicy, DiscreteDistribution};
use crate::error::{Error, Result};

pub use kde::{kde_on_grid, GridSpec, KernelConfig};
pub use particles::{make_init, make_target, InitShape, ParticleSet, Point, TargetShape};
pub use sinkhorn::{sinkhorn_distance, SinkhornConfig};

use kde::GridKde;

/// Objective driven by the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDivergence {
    Kl,
    Js,
    Qif,
    KlFlogf,
    JsFlogf,
    OneMinusF,
    Mmd,
}

impl FlowDivergence {
    pub const ALL: [FlowDivergence; 7] = [
        Self::Kl,
        Self::Js,
        Self::Qif,
        Self::KlFlogf,
        Self::JsFlogf,
        Self::OneMinusF,
        Self::Mmd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kl => "kl",
            Self::Js => "js",
            Self::Qif => "qif",
            Self::KlFlogf => "kl_flogf",
            Self::JsFlogf => "js_flogf",
            Self::OneMinusF => "one_minus_f",
            Self::Mmd => "mmd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub divergence: FlowDivergence,
    pub learning_rate: f64,
    pub iterations: usize,
    pub grid: GridSpec,
    pub kernel: KernelConfig,
    pub seed: u64,
    pub snapshot_every: usize,
    pub sinkhorn: SinkhornConfig,
    pub clamp: ClampPolicy,
    /// Write measured wall time into the trace; off keeps traces byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            divergence: FlowDivergence::Qif,
            learning_rate: 0.01,
            iterations: 3000,
            grid: GridSpec::default(),
            kernel: KernelConfig::default(),
            seed: 0,
            snapshot_every: 100,
            sinkhorn: SinkhornConfig::default(),
            clamp: ClampPolicy::default(),
            record_wall_time: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        self.grid.validate()?;
        self.kernel.validate()?;
        self.sinkhorn.validate()
    }
}

/// Frozen target: its grid KDE plus the raw samples (for `mmd` and Sinkhorn).
#[derive(Debug, Clone)]
pub struct FlowTarget {
    density: DiscreteDistribution,
    samples: ParticleSet,
    self_kernel: f64,
}

impl FlowTarget {
    pub fn from_samples(samples: ParticleSet, grid: &GridSpec, kernel: &KernelConfig) -> Result<Self> {
        let density = kde_on_grid(&samples, grid, kernel)?;
        let self_kernel = mmd::mean_kernel(&samples, &samples, kernel.sigma);
        Ok(Self {
            density,
            samples,
            self_kernel,
        })
    }

    pub fn density(&self) -> &DiscreteDistribution {
        &self.density
    }

    pub fn samples(&self) -> &ParticleSet {
        &self.samples
    }
}

/// Objective value and, on request, its gradient with respect to every particle.
fn evaluate(
    particles: &ParticleSet,
    target: &FlowTarget,
    cfg: &FlowConfig,
    with_grad: bool,
) -> Result<(f64, Option<Vec<Point>>)> {
    let sigma = cfg.kernel.sigma;
    if cfg.divergence == FlowDivergence::Mmd {
        let value = mmd::mmd2_with_target_term(particles, &target.samples, target.self_kernel, sigma);
        let grad = with_grad.then(|| mmd::mmd2_gradient(particles, &target.samples, sigma));
        return Ok((value, grad));
    }
    if target.density.dim() != cfg.grid.cells() {
        return Err(Error::DimensionMismatch(target.density.dim(), cfg.grid.cells()));
    }
    let kde = GridKde::new(particles, &cfg.grid, &cfg.kernel)?;
    let p = kde.distribution.weights();
    let q = target.density.weights();
    let eps = cfg.clamp.epsilon();
    let (value, cell_grad) = match cfg.divergence {
        FlowDivergence::Kl => (
            dv::kl_slices(p, q, eps),
            with_grad.then(|| dv::kl_partial_first(p, q, eps)),
        ),
        FlowDivergence::Js => (
            dv::js_slices(p, q, eps),
            with_grad.then(|| dv::js_partial_first(p, q, eps)),
        ),
        FlowDivergence::Qif => (
            dv::qif_from_fidelity(dv::fidelity_slices(p, q), eps),
            with_grad.then(|| dv::qif_partial_first(p, q, eps)),
        ),
        FlowDivergence::OneMinusF => (
            1.0 - dv::fidelity_slices(p, q),
            with_grad.then(|| dv::one_minus_f_partial_first(p, q, eps)),
        ),
        FlowDivergence::KlFlogf | FlowDivergence::JsFlogf => {
            let (d, partial) = if cfg.divergence == FlowDivergence::KlFlogf {
                (
                    dv::kl_slices(p, q, eps),
                    dv::kl_partial_first as fn(&[f64], &[f64], f64) -> Vec<f64>,
                )
            } else {
                (
                    dv::js_slices(p, q, eps),
                    dv::js_partial_first as fn(&[f64], &[f64], f64) -> Vec<f64>,
                )
            };
            // G(D + ε) keeps the transform and its factor log(D + ε) + 1 finite at D = 0
            let shifted = d.max(0.0) + eps;
            let value = dv::g_transform(shifted)?;
            let grad = if with_grad {
                let factor = dv::g_gradient_factor(shifted)?;
                Some(partial(p, q, eps).into_iter().map(|g| g * factor).collect())
            } else {
                None
            };
            (value, grad)
        }
        FlowDivergence::Mmd => unreachable!(),
    };
    let grad = cell_grad.map(|g| kde.pullback(particles, &g));
    Ok((value, grad))
}

/// Objective of `particles` against `target` under `cfg.divergence`.
pub fn flow_objective(particles: &ParticleSet, target: &FlowTarget, cfg: &FlowConfig) -> Result<f64> {
    let (v, _) = evaluate(particles, target, cfg, false)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(v)
}

/// `∂ objective / ∂x_i` for every particle.
pub fn flow_gradient(particles: &ParticleSet, target: &FlowTarget, cfg: &FlowConfig) -> Result<Vec<Point>> {
    let (_, grad) = evaluate(particles, target, cfg, true)?;
    let grad = grad.expect("gradient requested");
    if let Some(i) = grad.iter().position(|g| !(g[0].is_finite() && g[1].is_finite())) {
        return Err(Error::NonFiniteGradient(i));
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub sinkhorn: f64,
    pub wall_ms: f64,
}

/// Objective and Sinkhorn distance sampled along a flow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTrace {
    rows: Vec<TraceRow>,
}

impl MetricTrace {
    pub const HEADER: &'static str = "iter,objective,sinkhorn,wall_ms";

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    fn push(&mut self, row: TraceRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.iteration < row.iteration));
        self.rows.push(row);
    }

    pub fn first(&self) -> Option<&TraceRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.iteration, r.objective, r.sinkhorn, r.wall_ms)?;
        }
        Ok(())
    }
}

/// `x,y` header then one particle per line.
pub fn write_particles_csv<W: Write>(particles: &ParticleSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y")?;
    for p in particles.points() {
        writeln!(out, "{},{}", p[0], p[1])?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub iteration: usize,
    pub particles: ParticleSet,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub particles: ParticleSet,
    pub trace: MetricTrace,
    pub snapshots: Vec<Snapshot>,
}

/// A flow stopped by a numerical failure, with everything recorded so far.
#[derive(Debug)]
pub struct FlowAbort {
    pub error: Error,
    pub iteration: usize,
    pub partial: Box<FlowOutcome>,
}

impl std::fmt::Display for FlowAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "flow aborted at iteration {}: {}", self.iteration, self.error)
    }
}

impl std::error::Error for FlowAbort {}

fn is_record_step(t: usize, cfg: &FlowConfig) -> bool {
    t == 0 || t == cfg.iterations || t.is_multiple_of(cfg.snapshot_every)
}

/// Iterations at which [`run_flow`] records a trace row and a snapshot.
pub fn record_schedule(cfg: &FlowConfig) -> Vec<usize> {
    (0..=cfg.iterations).filter(|&t| is_record_step(t, cfg)).collect()
}

/// Runs `cfg.iterations` gradient steps from `init` toward `target_samples`.
///
/// Each step moves every particle by `-lr · N · ∂objective/∂x_i`, the
/// per-particle velocity of the flow (the raw partial carries a `1/N` from the
/// empirical density). Rows of the trace and snapshots are taken at
/// iteration 0, every `snapshot_every` iterations, and the final iteration.
pub fn run_flow(
    init: &ParticleSet,
    target_samples: &ParticleSet,
    cfg: &FlowConfig,
) -> std::result::Result<FlowOutcome, FlowAbort> {
    let empty = |error: Error| FlowAbort {
        error,
        iteration: 0,
        partial: Box::new(FlowOutcome {
            particles: init.clone(),
            trace: MetricTrace::default(),
            snapshots: Vec::new(),
        }),
    };
    cfg.validate().map_err(empty)?;
    let target = FlowTarget::from_samples(target_samples.clone(), &cfg.grid, &cfg.kernel).map_err(empty)?;

    let start = Instant::now();
    let step = cfg.learning_rate * init.len() as f64;
    let mut state = FlowOutcome {
        particles: init.clone(),
        trace: MetricTrace::default(),
        snapshots: Vec::new(),
    };

    for t in 0..=cfg.iterations {
        let record = is_record_step(t, cfg);
        let need_grad = t < cfg.iterations;
        if !record && !need_grad {
            continue;
        }
        let evaluated = evaluate(&state.particles, &target, cfg, need_grad).and_then(|(v, g)| {
            if !v.is_finite() {
                return Err(Error::NonFinite("objective"));
            }
            if let Some(g) = &g {
                if let Some(i) = g.iter().position(|g| !(g[0].is_finite() && g[1].is_finite())) {
                    return Err(Error::NonFiniteGradient(i));
                }
            }
            Ok((v, g))
        });
        let (value, grad) = match evaluated {
            Ok(x) => x,
            Err(error) => {
                return Err(FlowAbort {
                    error,
                    iteration: t,
                    partial: Box::new(state),
                })
            }
        };
        if record {
            let sinkhorn = match cfg.sinkhorn.distance(&state.particles, target.samples()) {
                Ok(s) => s,
                Err(error) => {
                    return Err(FlowAbort {
                        error,
                        iteration: t,
                        partial: Box::new(state),
                    })
                }
            };
            let wall_ms = if cfg.record_wall_time {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            state.trace.push(TraceRow {
                iteration: t,
                objective: value,
                sinkhorn,
                wall_ms,
            });
            state.snapshots.push(Snapshot {
                iteration: t,
                particles: state.particles.clone(),
            });
        }
        if let Some(grad) = grad {
            for (p, g) in state.particles.points_mut().iter_mut().zip(&grad) {
                p[0] -= step * g[0];
                p[1] -= step * g[1];
            }
        }
    }
    Ok(state)
}
