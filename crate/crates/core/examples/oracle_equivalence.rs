//! Classical overlap fidelity against the density-matrix fidelity of the
//! amplitude-encoded pure states, on random Dirichlet pairs.
//!
//! cargo run --release --example oracle_equivalence

use qif_lab::divergence::fidelity;
use qif_lab::oracle::{fidelity_oracle, PureStateOracleInput};
use qif_lab::{rng, DiscreteDistribution, Result};

fn main() -> Result<()> {
    let mut r = rng::stream(7, rng::ORACLE);
    for d in [2, 4, 8, 16] {
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let p = rng::dirichlet(&mut r, d, 0.5);
            let q = rng::dirichlet(&mut r, d, 0.5);
            let classical = fidelity(
                &DiscreteDistribution::from_mass(p.clone())?,
                &DiscreteDistribution::from_mass(q.clone())?,
            )?;
            let quantum = fidelity_oracle(&PureStateOracleInput::from_probabilities(&p, &q)?)?;
            worst = worst.max((classical - quantum).abs());
        }
        println!("d = {d:>2}: max |F - F_oracle| over 500 pairs = {worst:.2e}");
    }
    Ok(())
}
