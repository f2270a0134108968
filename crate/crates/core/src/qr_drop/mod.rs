//! Two-pass dropout training with a consistency penalty between the passes.
//!
//! Each example is pushed through the network twice under independent
//! dropout masks. The per-example loss is
//!
//! ```text
//! L = ½ (NLL(p1) + NLL(p2)) + β · C(p1, p2)
//! ```
//!
//! with `C` the bidirectional KL (R-Drop), QIF (QR-Drop), or nothing. The
//! batch loss is the mean over examples, minimised with plain minibatch SGD.

pub mod data;
pub mod loss;
pub mod mlp;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::divergence::ClampPolicy;
use crate::error::{Error, Result};
use crate::rng;

pub use data::{concentric_rings, two_moons, Dataset};
pub use loss::{consistency_loss, total_loss, BatchItem, ConsistencyKind, LossEval};
pub use mlp::{DropoutMask, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_widths: Vec<usize>,
    pub dropout_rate: f64,
    pub beta: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub consistency: ConsistencyKind,
    pub seed: u64,
    pub clamp: ClampPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_widths: vec![2, 32, 32, 2],
            dropout_rate: 0.1,
            beta: 1.0,
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 32,
            consistency: ConsistencyKind::Qif,
            seed: 0,
            clamp: ClampPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.layer_widths;
        if w.len() < 2 || w.contains(&0) {
            return Err(Error::Config("layer_widths needs >= 2 positive entries".into()));
        }
        if *w.last().unwrap() < 2 {
            return Err(Error::Config("final layer width (classes) must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Mean weighted consistency term `β·C` over the epoch's training examples.
    pub consistency_loss_mean: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,test_loss,train_acc,test_acc,consistency_mean";

pub fn write_history_csv<W: Write>(history: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.test_loss, r.train_acc, r.test_acc, r.consistency_loss_mean
        )?;
    }
    Ok(())
}

/// Dropout-free mean NLL and accuracy of `model` on `data`.
pub fn evaluate(model: &Mlp, data: &Dataset, clamp: ClampPolicy) -> Result<(f64, f64)> {
    let mut nll = 0.0;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let p = model.predict(data.features(i))?;
        let y = data.label(i);
        nll -= p[y].max(clamp.epsilon()).ln();
        let argmax = p
            .iter()
            .enumerate()
            .fold(0, |best, (k, &v)| if v > p[best] { k } else { best });
        correct += usize::from(argmax == y);
    }
    let n = data.len() as f64;
    Ok((nll / n, correct as f64 / n))
}

fn check_shapes(data: &Dataset, cfg: &TrainConfig, what: &str) -> Result<()> {
    let w = &cfg.layer_widths;
    if data.feature_dim() != w[0] {
        return Err(Error::Dataset(format!(
            "{what} set has {} features but the input width is {}",
            data.feature_dim(),
            w[0]
        )));
    }
    if data.classes() > *w.last().unwrap() {
        return Err(Error::Dataset(format!(
            "{what} set has {} classes but the output width is {}",
            data.classes(),
            w.last().unwrap()
        )));
    }
    Ok(())
}

/// Trains from a fresh seed-derived network; returns the model and per-epoch history.
pub fn train_model(train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, Vec<EpochRecord>)> {
    cfg.validate()?;
    check_shapes(train_set, cfg, "training")?;
    check_shapes(test_set, cfg, "test")?;
    train_set.require_all_classes()?;

    let mut model = Mlp::from_seed(&cfg.layer_widths, cfg.seed)?;
    let mut shuffle_rng = rng::stream(cfg.seed, rng::SHUFFLE);
    let mut dropout_rng = rng::stream(cfg.seed, rng::DROPOUT);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut cons_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<BatchItem<'_>> = chunk
                .iter()
                .map(|&i| BatchItem {
                    features: train_set.features(i),
                    label: train_set.label(i),
                    mask_seeds: (dropout_rng.random(), dropout_rng.random()),
                })
                .collect();
            let eval = total_loss(&model, &batch, cfg)?;
            let weight = chunk.len() as f64;
            loss_sum += eval.loss * weight;
            cons_sum += eval.consistency * weight;
            if cfg.learning_rate != 0.0 {
                for (p, g) in model.params_mut().iter_mut().zip(&eval.grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
        }
        let n = train_set.len() as f64;
        let (_, train_acc) = evaluate(&model, train_set, cfg.clamp)?;
        let (test_loss, test_acc) = evaluate(&model, test_set, cfg.clamp)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            test_loss,
            train_acc,
            test_acc,
            consistency_loss_mean: cons_sum / n,
        });
    }
    Ok((model, history))
}

pub fn train(train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochRecord>> {
    Ok(train_model(train_set, test_set, cfg)?.1)
}
