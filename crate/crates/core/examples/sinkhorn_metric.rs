//! Entropic optimal transport cost between point clouds: a cloud against
//! shifted copies of itself, and the star against the heart.
//!
//! cargo run --release --example sinkhorn_metric

use qif_lab::flow::{make_init, make_target, InitShape, SinkhornConfig, TargetShape};

fn main() -> qif_lab::Result<()> {
    let cfg = SinkhornConfig::default();
    let heart = make_target(TargetShape::Heart, 300, 0.02, 5)?;
    for dx in [0.0, 0.1, 0.25, 0.5, 1.0] {
        let moved = heart.translated(dx, 0.0);
        println!("heart vs heart + ({dx:.2}, 0): {:.5}", cfg.distance(&heart, &moved)?);
    }
    let star = make_init(InitShape::Star, 300, 0.0, 5)?;
    println!("star vs heart:               {:.5}", cfg.distance(&star, &heart)?);
    Ok(())
}
