//! Fully connected ReLU network with softmax output and inverted dropout on hidden activations.
//!
//! All parameters live in one flat vector: for each layer the `out × in`
//! weight matrix (row-major) followed by the `out` biases.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy)]
struct Layer {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl Layer {
    fn weights_len(&self) -> usize {
        self.inputs * self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Per-hidden-unit multipliers: `0` (dropped) or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    scales: Vec<Vec<f64>>,
}

impl DropoutMask {
    pub fn sample<R: Rng + ?Sized>(widths: &[usize], rate: f64, rng: &mut R) -> Self {
        let hidden = &widths[1..widths.len() - 1];
        let keep = 1.0 / (1.0 - rate);
        let scales = hidden
            .iter()
            .map(|&w| {
                (0..w)
                    .map(|_| {
                        if rate > 0.0 && rng.random::<f64>() < rate {
                            0.0
                        } else {
                            keep
                        }
                    })
                    .collect()
            })
            .collect();
        Self { scales }
    }

    /// Mask drawn from the `dropout` stream of `mask_seed`.
    pub fn from_seed(widths: &[usize], rate: f64, mask_seed: u64) -> Self {
        Self::sample(widths, rate, &mut rng::stream(mask_seed, rng::DROPOUT))
    }

    pub fn identity(widths: &[usize]) -> Self {
        Self {
            scales: widths[1..widths.len() - 1].iter().map(|&w| vec![1.0; w]).collect(),
        }
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (after ReLU and mask for hidden layers).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    hidden_pre: Vec<Vec<f64>>,
    mask: DropoutMask,
    pub probs: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

impl Mlp {
    /// Glorot-uniform weights drawn from `rng`, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(
                "network needs at least an input and an output width".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if *widths.last().unwrap() < 2 {
            return Err(Error::Config("output width (class count) must be >= 2".into()));
        }
        let mut m = Self {
            widths: widths.to_vec(),
            params: Vec::new(),
        };
        let total = m.layers().map(|l| l.weights_len() + l.outputs).sum();
        m.params = vec![0.0; total];
        for l in m.layers().collect::<Vec<_>>() {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut m.params[l.offset..l.offset + l.weights_len()] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(m)
    }

    pub fn from_seed(widths: &[usize], seed: u64) -> Result<Self> {
        Self::new(widths, &mut rng::stream(seed, rng::WEIGHTS))
    }

    fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |w| {
            let l = Layer {
                inputs: w[0],
                outputs: w[1],
                offset,
            };
            offset += w[0] * w[1] + w[1];
            l
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn forward(&self, x: &[f64], mask: &DropoutMask) -> Result<ForwardCache> {
        if x.len() != self.widths[0] {
            return Err(Error::DimensionMismatch(x.len(), self.widths[0]));
        }
        let n_layers = self.widths.len() - 1;
        let mut inputs = Vec::with_capacity(n_layers);
        let mut hidden_pre = Vec::with_capacity(n_layers - 1);
        let mut current = x.to_vec();
        let mut logits = Vec::new();
        for (idx, l) in self.layers().enumerate() {
            let w = &self.params[l.offset..l.offset + l.weights_len()];
            let b = &self.params[l.offset + l.weights_len()..l.offset + l.weights_len() + l.outputs];
            let z: Vec<f64> = w
                .chunks(l.inputs)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(&current).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            inputs.push(std::mem::take(&mut current));
            if idx + 1 == n_layers {
                logits = z;
            } else {
                current = z.iter().zip(&mask.scales[idx]).map(|(&v, &s)| v.max(0.0) * s).collect();
                hidden_pre.push(z);
            }
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("activation"));
        }
        let probs = softmax(&logits);
        Ok(ForwardCache {
            inputs,
            hidden_pre,
            mask: mask.clone(),
            probs,
        })
    }

    /// Class distribution for `x` under dropout drawn from `mask_seed`.
    pub fn forward_dropout(&self, x: &[f64], rate: f64, mask_seed: u64) -> Result<Vec<f64>> {
        let mask = DropoutMask::from_seed(&self.widths, rate, mask_seed);
        Ok(self.forward(x, &mask)?.probs)
    }

    /// Class distribution with dropout disabled.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, &DropoutMask::identity(&self.widths))?.probs)
    }

    /// Accumulates `scale · ∂L/∂θ` into `grad` given `∂L/∂logits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], scale: f64, grad: &mut [f64]) {
        let layers: Vec<Layer> = self.layers().collect();
        let mut delta: Vec<f64> = dlogits.iter().map(|d| d * scale).collect();
        for (idx, l) in layers.iter().enumerate().rev() {
            let input = &cache.inputs[idx];
            let (gw, gb) = grad[l.offset..l.offset + l.weights_len() + l.outputs].split_at_mut(l.weights_len());
            for ((row, gbi), &d) in gw.chunks_mut(l.inputs).zip(gb.iter_mut()).zip(&delta) {
                *gbi += d;
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if idx == 0 {
                break;
            }
            let w = &self.params[l.offset..l.offset + l.weights_len()];
            let mut prev = vec![0.0; l.inputs];
            for (row, &d) in w.chunks(l.inputs).zip(&delta) {
                for (p, &wij) in prev.iter_mut().zip(row) {
                    *p += wij * d;
                }
            }
            let pre = &cache.hidden_pre[idx - 1];
            let mask = &cache.mask.scales[idx - 1];
            delta = prev
                .iter()
                .zip(pre)
                .zip(mask)
                .map(|((&g, &z), &s)| if z > 0.0 { g * s } else { 0.0 })
                .collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_widths() {
        let mut r = rng::stream(0, "t");
        assert!(Mlp::new(&[3], &mut r).is_err());
        assert!(Mlp::new(&[3, 0, 2], &mut r).is_err());
        assert!(Mlp::new(&[3, 1], &mut r).is_err());
    }

    #[test]
    fn glorot_bounds_and_param_count() {
        let m = Mlp::from_seed(&[2, 8, 3], 1).unwrap();
        assert_eq!(m.params().len(), 2 * 8 + 8 + 8 * 3 + 3);
        let lim1 = (6.0f64 / 10.0).sqrt();
        assert!(m.params()[..16].iter().all(|w| w.abs() <= lim1));
        assert!(m.params()[16..24].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn outputs_are_distributions() {
        let m = Mlp::from_seed(&[4, 16, 16, 5], 3).unwrap();
        let mut r = rng::stream(3, "x");
        for s in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
            let p = m.forward_dropout(&x, 0.3, s).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn dropout_determinism() {
        let m = Mlp::from_seed(&[2, 32, 32, 2], 4).unwrap();
        let x = [0.3, -0.7];
        assert_eq!(
            m.forward_dropout(&x, 0.5, 9).unwrap(),
            m.forward_dropout(&x, 0.5, 9).unwrap()
        );
        let a = m.forward_dropout(&x, 0.0, 1).unwrap();
        let b = m.forward_dropout(&x, 0.0, 2).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12);
        }
        assert_eq!(a, m.predict(&x).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let m = Mlp::from_seed(&[2, 4, 2], 4).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }
}
