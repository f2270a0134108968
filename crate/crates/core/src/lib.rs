//! # qif-lab
//!
//! Fidelity-based divergence (QIF) and its baselines, a kernel-density particle
//! gradient flow engine, and a small dropout-consistency training harness.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`divergence`] | `DiscreteDistribution`, fidelity, QIF, KL, JS, Bhattacharyya, `F log F` transforms and their partials |
//! | [`oracle`] | Density-matrix (Uhlmann) fidelity for pure states, used to certify the classical overlap formula |
//! | [`flow`] | Particle sets, grid KDE, divergence / MMD gradient flows, Sinkhorn metric |
//! | [`qr_drop`] | MLP with manual backprop, two-pass dropout, R-Drop / QR-Drop consistency losses |
//! | [`cli`] | The `qif-lab` command-line driver and its JSON config schema |
//!
//! The QIF divergence between two distributions over the same `d` outcomes is
//! `-F log F` where `F = (Σ √(p_i q_i))²`. It lies in `[0, 1/e]`, is symmetric,
//! and stays finite on disjoint supports.
//!
//! ```rust
//! use qif_lab::divergence::{qif, ClampPolicy, DiscreteDistribution};
//!
//! let p = DiscreteDistribution::new(vec![0.5, 0.5]).unwrap();
//! let q = DiscreteDistribution::new(vec![1.0, 0.0]).unwrap();
//! let d = qif(&p, &q, ClampPolicy::default()).unwrap();
//! assert!((d - (-0.5f64 * 0.5f64.ln())).abs() < 1e-12);
//! ```

#![forbid(unsafe_code)]

pub mod cli;
pub mod divergence;
pub mod error;
pub mod flow;
pub mod oracle;
pub mod qr_drop;
pub mod rng;

pub use divergence::{ClampPolicy, DiscreteDistribution};
pub use error::{Error, Result};
