//! Every divergence in the crate on a few distribution pairs, including
//! disjoint supports where KL blows up and QIF stays tiny.
//!
//! cargo run --example divergences

use qif_lab::divergence::{bhattacharyya_distance, fidelity, g_transform, js, kl, qif};
use qif_lab::{ClampPolicy, DiscreteDistribution, Result};

fn main() -> Result<()> {
    let clamp = ClampPolicy::default();
    let pairs = [
        ("identical", vec![0.25; 4], vec![0.25; 4]),
        ("near", vec![0.4, 0.3, 0.2, 0.1], vec![0.35, 0.3, 0.25, 0.1]),
        ("half overlap", vec![0.5, 0.5, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]),
        ("disjoint", vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]),
    ];

    println!(
        "{:<13} {:>10} {:>10} {:>10} {:>10} {:>12} {:>10}",
        "pair", "fidelity", "kl", "js", "bhatt", "qif", "G(js)"
    );
    for (name, p, q) in pairs {
        let p = DiscreteDistribution::new(p)?;
        let q = DiscreteDistribution::new(q)?;
        let j = js(&p, &q, clamp)?;
        let gj = if j > 0.0 { g_transform(j)? } else { 0.0 };
        println!(
            "{:<13} {:>10.6} {:>10.4} {:>10.6} {:>10.4} {:>12.4e} {:>10.6}",
            name,
            fidelity(&p, &q)?,
            kl(&p, &q, clamp)?,
            j,
            bhattacharyya_distance(&p, &q, clamp)?,
            qif(&p, &q, clamp)?,
            gj,
        );
    }
    println!("\nQIF never exceeds 1/e = {:.6}", (-1.0f64).exp());
    Ok(())
}
