//! Star-shaped particles flowing onto a heart under the QIF objective.
//! Writes the trace and the final particles as CSV into the given directory.
//!
//! cargo run --release --example particle_flow -- [out_dir]

use std::fs::File;
use std::io::BufWriter;

use qif_lab::flow::{
    make_init, make_target, run_flow, write_particles_csv, FlowConfig, FlowDivergence, GridSpec, InitShape, TargetShape,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1);
    let init = make_init(InitShape::Star, 400, 0.0, 1)?;
    let target = make_target(TargetShape::Heart, 400, 0.02, 1)?;
    let cfg = FlowConfig {
        divergence: FlowDivergence::Qif,
        iterations: 1500,
        snapshot_every: 150,
        grid: GridSpec::new([-1.5, 1.5, -1.5, 1.5], 48)?,
        seed: 1,
        ..FlowConfig::default()
    };

    let outcome = run_flow(&init, &target, &cfg)?;
    println!("{:>6} {:>12} {:>10}", "iter", "qif", "sinkhorn");
    for row in outcome.trace.rows() {
        println!("{:>6} {:>12.6} {:>10.5}", row.iteration, row.objective, row.sinkhorn);
    }

    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        outcome
            .trace
            .write_csv(BufWriter::new(File::create(format!("{dir}/trace.csv"))?))?;
        write_particles_csv(
            &outcome.particles,
            BufWriter::new(File::create(format!("{dir}/final.csv"))?),
        )?;
        write_particles_csv(&target, BufWriter::new(File::create(format!("{dir}/target.csv"))?))?;
        println!("wrote {dir}/trace.csv, final.csv, target.csv");
    }
    Ok(())
}
