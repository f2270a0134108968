//! Two-pass dropout objective: averaged NLL plus a weighted consistency term.

use serde::{Deserialize, Serialize};

use super::mlp::{DropoutMask, Mlp};
use super::TrainConfig;
use crate::divergence::{self as dv, ClampPolicy, DiscreteDistribution};
use crate::error::{Error, Result};

/// Penalty tying together the two dropout passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyKind {
    None,
    /// `½ (KL(p1‖p2) + KL(p2‖p1))`, as in R-Drop.
    KlBidirectional,
    /// `QIF(p1, p2)`, as in QR-Drop.
    Qif,
}

impl ConsistencyKind {
    pub const ALL: [ConsistencyKind; 3] = [Self::None, Self::KlBidirectional, Self::Qif];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::KlBidirectional => "kl_bidirectional",
            Self::Qif => "qif",
        }
    }
}

pub(crate) fn consistency_slices(p1: &[f64], p2: &[f64], kind: ConsistencyKind, eps: f64) -> f64 {
    match kind {
        ConsistencyKind::None => 0.0,
        ConsistencyKind::KlBidirectional => 0.5 * (dv::kl_slices(p1, p2, eps) + dv::kl_slices(p2, p1, eps)),
        ConsistencyKind::Qif => dv::qif_from_fidelity(dv::fidelity_slices(p1, p2), eps),
    }
}

/// Consistency penalty between two output distributions.
pub fn consistency_loss(
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    kind: ConsistencyKind,
    clamp: ClampPolicy,
) -> Result<f64> {
    if p1.dim() != p2.dim() {
        return Err(Error::DimensionMismatch(p1.dim(), p2.dim()));
    }
    Ok(consistency_slices(p1.weights(), p2.weights(), kind, clamp.epsilon()))
}

/// `(∂C/∂p1, ∂C/∂p2)`. Identical inputs sit at the minimum and get exact zeros.
pub(crate) fn consistency_partials(p1: &[f64], p2: &[f64], kind: ConsistencyKind, eps: f64) -> (Vec<f64>, Vec<f64>) {
    if kind == ConsistencyKind::None || p1 == p2 {
        return (vec![0.0; p1.len()], vec![0.0; p2.len()]);
    }
    match kind {
        ConsistencyKind::KlBidirectional => {
            let half_sum =
                |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> { a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect() };
            (
                half_sum(dv::kl_partial_first(p1, p2, eps), dv::kl_partial_second(p2, p1, eps)),
                half_sum(dv::kl_partial_first(p2, p1, eps), dv::kl_partial_second(p1, p2, eps)),
            )
        }
        ConsistencyKind::Qif => (dv::qif_partial_first(p1, p2, eps), dv::qif_partial_first(p2, p1, eps)),
        ConsistencyKind::None => unreachable!(),
    }
}

/// `J_softmaxᵀ g = p ⊙ (g - ⟨g, p⟩)`.
fn softmax_pullback(p: &[f64], g: &[f64]) -> Vec<f64> {
    let mean: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(a, b)| a * (b - mean)).collect()
}

fn nll(p: &[f64], label: usize, eps: f64) -> f64 {
    -p[label].max(eps).ln()
}

/// `∂ NLL / ∂logits = p - e_y`, or zero when `p_y` sits on the floor.
fn nll_logit_grad(p: &[f64], label: usize, eps: f64) -> Vec<f64> {
    if p[label] <= eps {
        return vec![0.0; p.len()];
    }
    p.iter()
        .enumerate()
        .map(|(k, &v)| if k == label { v - 1.0 } else { v })
        .collect()
}

/// One labelled example with the seeds of its two dropout masks.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub features: &'a [f64],
    pub label: usize,
    pub mask_seeds: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct LossEval {
    /// Batch mean of `½(NLL1 + NLL2) + β·C`.
    pub loss: f64,
    /// Batch mean of `½(NLL1 + NLL2)`.
    pub nll: f64,
    /// Batch mean of the weighted term `β·C`.
    pub consistency: f64,
    /// `∂ loss / ∂θ`, same layout as [`Mlp::params`].
    pub grad: Vec<f64>,
}

/// Mean two-pass loss over `batch` and its parameter gradient.
pub fn total_loss(model: &Mlp, batch: &[BatchItem<'_>], cfg: &TrainConfig) -> Result<LossEval> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let eps = cfg.clamp.epsilon();
    let beta = cfg.beta;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; model.params().len()];
    let (mut nll_sum, mut cons_sum) = (0.0, 0.0);
    for item in batch {
        if item.label >= model.classes() {
            return Err(Error::Dataset(format!(
                "label {} out of range for {} classes",
                item.label,
                model.classes()
            )));
        }
        let m1 = DropoutMask::from_seed(model.widths(), cfg.dropout_rate, item.mask_seeds.0);
        let m2 = DropoutMask::from_seed(model.widths(), cfg.dropout_rate, item.mask_seeds.1);
        let c1 = model.forward(item.features, &m1)?;
        let c2 = model.forward(item.features, &m2)?;
        let (p1, p2) = (&c1.probs, &c2.probs);

        nll_sum += 0.5 * (nll(p1, item.label, eps) + nll(p2, item.label, eps));
        let mut d1: Vec<f64> = nll_logit_grad(p1, item.label, eps).iter().map(|g| 0.5 * g).collect();
        let mut d2: Vec<f64> = nll_logit_grad(p2, item.label, eps).iter().map(|g| 0.5 * g).collect();

        if cfg.consistency != ConsistencyKind::None {
            cons_sum += beta * consistency_slices(p1, p2, cfg.consistency, eps);
            if beta != 0.0 {
                let (g1, g2) = consistency_partials(p1, p2, cfg.consistency, eps);
                for (d, g) in d1.iter_mut().zip(softmax_pullback(p1, &g1)) {
                    *d += beta * g;
                }
                for (d, g) in d2.iter_mut().zip(softmax_pullback(p2, &g2)) {
                    *d += beta * g;
                }
            }
        }
        model.backward(&c1, &d1, scale, &mut grad);
        model.backward(&c2, &d2, scale, &mut grad);
    }
    let nll = nll_sum * scale;
    let consistency = cons_sum * scale;
    let loss = nll + consistency;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(LossEval {
        loss,
        nll,
        consistency,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use std::f64::consts::E;

    fn dist(w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(w.to_vec()).unwrap()
    }

    #[test]
    fn identical_inputs_cost_nothing() {
        let p = dist(&[0.2, 0.5, 0.3]);
        for kind in ConsistencyKind::ALL {
            assert_eq!(consistency_loss(&p, &p, kind, ClampPolicy::default()).unwrap(), 0.0);
        }
    }

    #[test]
    fn bidirectional_kl_hand_value() {
        let v = consistency_loss(
            &dist(&[0.9, 0.1]),
            &dist(&[0.1, 0.9]),
            ConsistencyKind::KlBidirectional,
            ClampPolicy::default(),
        )
        .unwrap();
        // brute force: both directions equal 0.9 ln 9 + 0.1 ln(1/9)
        let one_way = 0.9 * (0.9f64 / 0.1).ln() + 0.1 * (0.1f64 / 0.9).ln();
        assert!((v - one_way).abs() < 1e-14);
        assert!((v - 0.8 * 9f64.ln()).abs() < 1e-14);
        assert!((v - 1.7578).abs() < 1e-4);
    }

    #[test]
    fn qif_bounded_kl_not() {
        let mut r = rng::stream(5, "pairs");
        let mut kl_exceeds = false;
        for _ in 0..10_000 {
            let d = r.random_range(2..=10);
            let p = dist(&rng::dirichlet(&mut r, d, 0.3));
            let q = dist(&rng::dirichlet(&mut r, d, 0.3));
            let c = ClampPolicy::default();
            let qv = consistency_loss(&p, &q, ConsistencyKind::Qif, c).unwrap();
            assert!((0.0..=1.0 / E).contains(&qv));
            let kv = consistency_loss(&p, &q, ConsistencyKind::KlBidirectional, c).unwrap();
            assert!(kv >= -1e-12);
            kl_exceeds |= kv > 1.0 / E;
            for kind in ConsistencyKind::ALL {
                let ab = consistency_loss(&p, &q, kind, c).unwrap();
                let ba = consistency_loss(&q, &p, kind, c).unwrap();
                assert!((ab - ba).abs() <= 1e-12);
            }
        }
        assert!(kl_exceeds);
    }

    #[test]
    fn mismatched_dimensions() {
        assert!(consistency_loss(
            &dist(&[0.5, 0.5]),
            &dist(&[0.2, 0.3, 0.5]),
            ConsistencyKind::Qif,
            ClampPolicy::default()
        )
        .is_err());
    }

    #[test]
    fn partials_match_finite_differences() {
        let p1 = [0.2, 0.3, 0.5];
        let p2 = [0.6, 0.1, 0.3];
        let eps = 1e-13;
        let h = 1e-7;
        for kind in [ConsistencyKind::KlBidirectional, ConsistencyKind::Qif] {
            let (g1, g2) = consistency_partials(&p1, &p2, kind, eps);
            for k in 0..3 {
                let mut up = p1;
                let mut dn = p1;
                up[k] += h;
                dn[k] -= h;
                let fd =
                    (consistency_slices(&up, &p2, kind, eps) - consistency_slices(&dn, &p2, kind, eps)) / (2.0 * h);
                assert!((fd - g1[k]).abs() < 1e-6, "{kind:?} p1[{k}]");
                let mut up = p2;
                let mut dn = p2;
                up[k] += h;
                dn[k] -= h;
                let fd =
                    (consistency_slices(&p1, &up, kind, eps) - consistency_slices(&p1, &dn, kind, eps)) / (2.0 * h);
                assert!((fd - g2[k]).abs() < 1e-6, "{kind:?} p2[{k}]");
            }
        }
    }

    fn cfg(kind: ConsistencyKind, beta: f64, rate: f64) -> TrainConfig {
        TrainConfig {
            layer_widths: vec![2, 4, 2],
            dropout_rate: rate,
            beta,
            consistency: kind,
            ..TrainConfig::default()
        }
    }

    fn batch<'a>(xs: &'a [[f64; 2]], labels: &[usize]) -> Vec<BatchItem<'a>> {
        xs.iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (x, &label))| BatchItem {
                features: x,
                label,
                mask_seeds: (2 * i as u64 + 11, 2 * i as u64 + 12),
            })
            .collect()
    }

    #[test]
    fn beta_zero_gives_pure_nll() {
        let model = Mlp::from_seed(&[2, 4, 2], 1).unwrap();
        let xs = [[0.1, 0.2], [-0.5, 0.7], [1.0, -1.0]];
        let b = batch(&xs, &[0, 1, 1]);
        let none = total_loss(&model, &b, &cfg(ConsistencyKind::None, 0.0, 0.3)).unwrap();
        for kind in [ConsistencyKind::KlBidirectional, ConsistencyKind::Qif] {
            let e = total_loss(&model, &b, &cfg(kind, 0.0, 0.3)).unwrap();
            assert_eq!(e.loss, none.loss);
            assert_eq!(e.grad, none.grad);
            assert_eq!(e.loss, e.nll);
        }
    }

    #[test]
    fn no_dropout_collapses_to_single_pass() {
        let model = Mlp::from_seed(&[2, 4, 2], 1).unwrap();
        let xs = [[0.1, 0.2], [-0.5, 0.7], [1.0, -1.0]];
        let labels = [0, 1, 1];
        let b = batch(&xs, &labels);
        let single: f64 = xs
            .iter()
            .zip(&labels)
            .map(|(x, &y)| -model.predict(x).unwrap()[y].ln())
            .sum::<f64>()
            / 3.0;
        for kind in ConsistencyKind::ALL {
            let e = total_loss(&model, &b, &cfg(kind, 1.0, 0.0)).unwrap();
            assert_eq!(e.consistency, 0.0);
            assert!((e.loss - single).abs() < 1e-12);
        }
    }
}
