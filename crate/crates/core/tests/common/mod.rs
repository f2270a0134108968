#![allow(dead_code)]

use qif_lab::flow::{
    flow_gradient, flow_objective, FlowConfig, FlowDivergence, FlowTarget, GridSpec, KernelConfig, ParticleSet,
};
use qif_lab::qr_drop::{total_loss, BatchItem, ConsistencyKind, Mlp, TrainConfig};
use qif_lab::rng;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_RTOL: f64 = 1e-4;
pub const FD_ATOL: f64 = 1e-6;

/// Worst `|a - b| - (atol + rtol |b|)` seen; the check passes when this is <= 0.
#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub checked: usize,
    pub worst_excess: f64,
    pub worst_abs: f64,
}

impl FdReport {
    fn add(&mut self, analytic: f64, numeric: f64) {
        let err = (analytic - numeric).abs();
        let excess = err - (FD_ATOL + FD_RTOL * numeric.abs());
        if self.checked == 0 || excess > self.worst_excess {
            self.worst_excess = excess;
        }
        self.worst_abs = self.worst_abs.max(err);
        self.checked += 1;
    }

    pub fn merge(&mut self, other: FdReport) {
        if other.checked == 0 {
            return;
        }
        if self.checked == 0 || other.worst_excess > self.worst_excess {
            self.worst_excess = other.worst_excess;
        }
        self.worst_abs = self.worst_abs.max(other.worst_abs);
        self.checked += other.checked;
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.worst_excess <= 0.0
    }
}

fn cloud<R: Rng>(r: &mut R, n: usize, spread: f64, cx: f64, cy: f64) -> ParticleSet {
    let pts = (0..n)
        .map(|_| {
            [
                cx + r.random_range(-spread..spread),
                cy + r.random_range(-spread..spread),
            ]
        })
        .collect();
    ParticleSet::new(pts).unwrap()
}

/// One random flow instance: 20 particles, R <= 16 grid, every coordinate checked.
pub fn flow_fd_instance(divergence: FlowDivergence, seed: u64) -> FdReport {
    let mut r = rng::stream(seed, "fd-flow");
    let n = 20;
    let res = r.random_range(8..=16);
    let sigma = r.random_range(0.25..0.5);
    let grid = GridSpec::new([-1.5, 1.5, -1.5, 1.5], res).unwrap();
    let kernel = KernelConfig::new(sigma).unwrap();
    let cx = r.random_range(-0.3..0.3);
    let particles = cloud(&mut r, n, 0.8, cx, 0.0);
    let (m, cy) = (r.random_range(10..=20), r.random_range(-0.3..0.3));
    let target_samples = cloud(&mut r, m, 0.6, 0.2, cy);
    let cfg = FlowConfig {
        divergence,
        grid,
        kernel,
        ..FlowConfig::default()
    };
    let target = FlowTarget::from_samples(target_samples, &grid, &kernel).unwrap();
    let grad = flow_gradient(&particles, &target, &cfg).unwrap();

    let mut report = FdReport::default();
    for i in 0..n {
        for k in 0..2 {
            let shifted = |h: f64| {
                let mut pts = particles.points().to_vec();
                pts[i][k] += h;
                flow_objective(&ParticleSet::new(pts).unwrap(), &target, &cfg).unwrap()
            };
            let numeric = (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP);
            report.add(grad[i][k], numeric);
        }
    }
    report
}

/// One random 2-4-2 network with a batch of 3 under two dropout masks; every parameter checked.
pub fn loss_fd_instance(kind: ConsistencyKind, seed: u64) -> FdReport {
    let mut r = rng::stream(seed, "fd-loss");
    let widths = [2, 4, 2];
    let model = Mlp::from_seed(&widths, seed).unwrap();
    let xs: Vec<[f64; 2]> = (0..3)
        .map(|_| [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)])
        .collect();
    let batch: Vec<BatchItem<'_>> = xs
        .iter()
        .map(|x| BatchItem {
            features: x,
            label: r.random_range(0..2),
            mask_seeds: (r.random(), r.random()),
        })
        .collect();
    let cfg = TrainConfig {
        layer_widths: widths.to_vec(),
        dropout_rate: 0.25,
        beta: r.random_range(0.5..2.0),
        consistency: kind,
        ..TrainConfig::default()
    };
    let grad = total_loss(&model, &batch, &cfg).unwrap().grad;

    let mut report = FdReport::default();
    for (j, &analytic) in grad.iter().enumerate() {
        let shifted = |h: f64| {
            let mut m = model.clone();
            m.params_mut()[j] += h;
            total_loss(&m, &batch, &cfg).unwrap().loss
        };
        let numeric = (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP);
        report.add(analytic, numeric);
    }
    report
}
