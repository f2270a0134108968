//! Seed handling. Every consumer of randomness draws from a named stream
//! derived from one root seed, so adding a consumer never shifts the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

pub const INIT: &str = "init";
pub const TARGET: &str = "target";
pub const DROPOUT: &str = "dropout";
pub const SHUFFLE: &str = "shuffle";
pub const WEIGHTS: &str = "weights";
pub const DATA: &str = "data";
pub const ORACLE: &str = "oracle";

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent generator for `name` under `seed`.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Draws a `d`-outcome probability vector from a symmetric Dirichlet(alpha).
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, d: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let mut w: Vec<f64> = (0..d).map(|_| gamma.sample(rng)).collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 && s.is_finite() {
            w.iter_mut().for_each(|x| *x /= s);
            return w;
        }
    }
}
