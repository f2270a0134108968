//! The same star -> heart flow under every objective, reporting how far each
//! one moves the cloud in Sinkhorn distance.
//!
//! The `*_flogf` objectives minimise `D log D`, whose minimum sits at
//! `D = 1/e`, so they push the divergence toward `1/e` rather than toward 0.
//!
//! cargo run --release --example divergence_comparison

use std::time::Instant;

use qif_lab::flow::{make_init, make_target, run_flow, FlowConfig, FlowDivergence, GridSpec, InitShape, TargetShape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let init = make_init(InitShape::Star, 200, 0.0, 3)?;
    let target = make_target(TargetShape::Heart, 200, 0.02, 3)?;
    println!(
        "{:<12} {:>12} {:>12} {:>10} {:>10} {:>8}",
        "objective", "start", "end", "W start", "W end", "secs"
    );
    for divergence in FlowDivergence::ALL {
        let cfg = FlowConfig {
            divergence,
            iterations: 1000,
            snapshot_every: 1000,
            grid: GridSpec::new([-1.5, 1.5, -1.5, 1.5], 32)?,
            ..FlowConfig::default()
        };
        let t = Instant::now();
        let out = run_flow(&init, &target, &cfg)?;
        let (a, b) = (out.trace.first().unwrap(), out.trace.last().unwrap());
        println!(
            "{:<12} {:>12.6} {:>12.6} {:>10.5} {:>10.5} {:>8.2}",
            divergence.name(),
            a.objective,
            b.objective,
            a.sinkhorn,
            b.sinkhorn,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
