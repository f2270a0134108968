//! Scalar divergences between discrete distributions.
//!
//! | Function | Formula |
//! |----------|---------|
//! | [`fidelity`] | `F = (Σ √p_i √q_i)²`, clamped to `[0, 1]` |
//! | [`qif`] | `-F log F` with `F ← max(F, ε)` |
//! | [`kl`] | `Σ p_i log(p_i / max(q_i, ε))`, `0 log 0 = 0` |
//! | [`js`] | `½ KL(p‖M) + ½ KL(q‖M)`, `M = ½(p + q)` |
//! | [`bhattacharyya_distance`] | `-ln max(Σ √(p_i q_i), ε)` |
//! | [`g_transform`] | `f log f` |
//! | [`g_gradient_factor`] | `log f + 1` |
//! | [`simple_fidelity_loss`] | `1 - f` |
//!
//! Every function is O(d). The `*_partial_*` functions give analytic
//! derivatives with respect to one argument, treating the other as fixed;
//! the flow engine and the dropout trainer chain them through their own
//! Jacobians.

use crate::error::{Error, Result};

/// Sum tolerance applied by [`DiscreteDistribution::new`] before normalizing.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Nonnegative weights over `d >= 1` outcomes that sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates and normalizes `weights`.
    ///
    /// Rejects negative or non-finite entries and sums outside
    /// `[1 - 1e-6, 1 + 1e-6]`; small drift inside that window is divided out.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self::divide_by(weights, sum))
    }

    /// Normalizes arbitrary nonnegative mass with a positive finite total.
    pub fn from_mass(weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(&weights)?;
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self::divide_by(weights, sum))
    }

    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self {
            weights: vec![1.0 / d as f64; d],
        })
    }

    fn divide_by(mut weights: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut sum = 0.0;
    for (index, &value) in weights.iter().enumerate() {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidWeight { index, value });
        }
        sum += value;
    }
    Ok(sum)
}

/// Numerical floor used for fidelity and for KL/JS denominators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampPolicy {
    epsilon: f64,
}

impl ClampPolicy {
    pub const DEFAULT_EPSILON: f64 = 1e-13;

    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1e-6) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for ClampPolicy {
    fn default() -> Self {
        Self {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

fn check_dims(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// `Σ √(p_i q_i)`. Slices must have equal length.
pub(crate) fn overlap(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| (a * b).sqrt()).sum()
}

/// Fidelity of raw weight slices; identical inputs give exactly 1.
pub(crate) fn fidelity_slices(p: &[f64], q: &[f64]) -> f64 {
    if p == q {
        return 1.0;
    }
    let b = overlap(p, q);
    (b * b).clamp(0.0, 1.0)
}

/// Identical inputs give exactly 0, even where the floor would bite.
pub(crate) fn kl_slices(p: &[f64], q: &[f64], eps: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b.max(eps)).ln())
        .sum()
}

pub(crate) fn js_slices(p: &[f64], q: &[f64], eps: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = (0.5 * (a + b)).max(eps);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    total
}

pub(crate) fn qif_from_fidelity(f: f64, eps: f64) -> f64 {
    let f = f.max(eps);
    // -0.0 at f == 1 becomes +0.0
    -f * f.ln() + 0.0
}

/// Squared Bhattacharyya coefficient, clamped to `[0, 1]`.
pub fn fidelity(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_dims(p.weights(), q.weights())?;
    Ok(fidelity_slices(p.weights(), q.weights()))
}

/// `-F log F` with `F` floored at the clamp epsilon. Lies in `[0, 1/e]`.
pub fn qif(p: &DiscreteDistribution, q: &DiscreteDistribution, clamp: ClampPolicy) -> Result<f64> {
    let f = fidelity(p, q)?;
    Ok(qif_from_fidelity(f, clamp.epsilon()))
}

/// `KL(p‖q)`; zero-mass terms of `p` contribute nothing and `q` is floored at epsilon.
pub fn kl(p: &DiscreteDistribution, q: &DiscreteDistribution, clamp: ClampPolicy) -> Result<f64> {
    check_dims(p.weights(), q.weights())?;
    Ok(kl_slices(p.weights(), q.weights(), clamp.epsilon()))
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`.
pub fn js(p: &DiscreteDistribution, q: &DiscreteDistribution, clamp: ClampPolicy) -> Result<f64> {
    check_dims(p.weights(), q.weights())?;
    Ok(js_slices(p.weights(), q.weights(), clamp.epsilon()))
}

pub fn bhattacharyya_distance(p: &DiscreteDistribution, q: &DiscreteDistribution, clamp: ClampPolicy) -> Result<f64> {
    check_dims(p.weights(), q.weights())?;
    if p == q {
        return Ok(0.0);
    }
    let b = overlap(p.weights(), q.weights()).min(1.0);
    Ok(-b.max(clamp.epsilon()).ln() + 0.0)
}

fn require_positive(f: f64) -> Result<()> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::Domain {
            what: "f",
            value: f,
            domain: "(0, inf)",
        });
    }
    Ok(())
}

/// `G(f) = f log f`. Minimum `-1/e` at `f = 1/e`.
pub fn g_transform(f: f64) -> Result<f64> {
    require_positive(f)?;
    Ok(f * f.ln())
}

/// `dG/df = log f + 1`, the factor that rescales a divergence gradient under `G`.
pub fn g_gradient_factor(f: f64) -> Result<f64> {
    require_positive(f)?;
    Ok(f.ln() + 1.0)
}

/// `1 - f` for a fidelity `f` in `[0, 1]`.
pub fn simple_fidelity_loss(f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain {
            what: "fidelity",
            value: f,
            domain: "[0, 1]",
        });
    }
    Ok(1.0 - f)
}

// ---------------------------------------------------------------------------
// Partial derivatives. Outcomes where the differentiated argument has zero
// mass get a zero partial: the mass there is pinned at zero by whatever
// produced it, so the chain rule never needs the (infinite) log term.
// ---------------------------------------------------------------------------

/// `∂ KL(p‖q) / ∂p_k = log p_k + 1 - log max(q_k, ε)`.
pub fn kl_partial_first(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { a.ln() + 1.0 - b.max(eps).ln() } else { 0.0 })
        .collect()
}

/// `∂ KL(p‖q) / ∂q_k = -p_k / q_k` where `q_k` is above the floor, else 0.
pub fn kl_partial_second(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if b > eps { -a / b } else { 0.0 })
        .collect()
}

/// `∂ JS(p, q) / ∂p_k`: `½ log(p_k / M_k)`, or `½(log p_k + 1 - log ε)` where `M_k` is floored.
pub fn js_partial_first(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a <= 0.0 {
                return 0.0;
            }
            let m = 0.5 * (a + b);
            if m > eps {
                0.5 * (a / m).ln()
            } else {
                0.5 * (a.ln() + 1.0 - eps.ln())
            }
        })
        .collect()
}

/// `∂ QIF(p, q) / ∂p_k = -(log F + 1) · B · √(q_k / max(p_k, ε))`, `B = Σ √(p_j q_j)`.
///
/// Zero when `F` sits on the epsilon floor or when `p == q` exactly.
pub fn qif_partial_first(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    if p == q {
        return vec![0.0; p.len()];
    }
    let b = overlap(p, q);
    let f = (b * b).min(1.0);
    if f < eps {
        return vec![0.0; p.len()];
    }
    let scale = -(f.ln() + 1.0) * b;
    sqrt_ratio(p, q, eps, scale)
}

/// `∂ (1 - F) / ∂p_k = -B · √(q_k / max(p_k, ε))`.
pub fn one_minus_f_partial_first(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    if p == q {
        return vec![0.0; p.len()];
    }
    let b = overlap(p, q);
    if b * b > 1.0 {
        return vec![0.0; p.len()];
    }
    sqrt_ratio(p, q, eps, -b)
}

fn sqrt_ratio(p: &[f64], q: &[f64], eps: f64, scale: f64) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { scale * (b / a.max(eps)).sqrt() } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn dist(w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(w.to_vec()).unwrap()
    }

    fn eps() -> ClampPolicy {
        ClampPolicy::default()
    }

    #[test]
    fn identical_inputs_below_the_floor_score_zero() {
        let p = dist(&[1.0 - 1e-15, 1e-15]);
        assert_eq!(kl(&p, &p, eps()).unwrap(), 0.0);
        assert_eq!(js(&p, &p, eps()).unwrap(), 0.0);
        assert_eq!(qif(&p, &p, eps()).unwrap(), 0.0);
    }

    #[test]
    fn constructor_validates_and_normalizes() {
        assert!(matches!(
            DiscreteDistribution::new(vec![]),
            Err(Error::EmptyDistribution)
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![0.5, -0.1, 0.6]),
            Err(Error::InvalidWeight { index: 1, .. })
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![0.5, f64::NAN]),
            Err(Error::InvalidWeight { index: 1, .. })
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized(_))
        ));
        let d = DiscreteDistribution::new(vec![0.5, 0.5 + 5e-7]).unwrap();
        assert_abs_diff_eq!(d.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let m = DiscreteDistribution::from_mass(vec![2.0, 6.0]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
        assert!(DiscreteDistribution::from_mass(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn clamp_policy_range() {
        assert!(ClampPolicy::new(0.0).is_err());
        assert!(ClampPolicy::new(1e-6).is_err());
        assert!(ClampPolicy::new(-1e-13).is_err());
        assert_eq!(ClampPolicy::new(1e-10).unwrap().epsilon(), 1e-10);
        assert_eq!(ClampPolicy::default().epsilon(), 1e-13);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.2, 0.3, 0.5]);
        assert!(matches!(fidelity(&p, &q), Err(Error::DimensionMismatch(2, 3))));
        assert!(qif(&p, &q, eps()).is_err());
        assert!(kl(&p, &q, eps()).is_err());
        assert!(js(&p, &q, eps()).is_err());
        assert!(bhattacharyya_distance(&p, &q, eps()).is_err());
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity(&dist(&[1.0, 0.0]), &dist(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(fidelity(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 0.0);
        assert_abs_diff_eq!(
            fidelity(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn qif_examples() {
        let p = dist(&[0.3, 0.7]);
        assert_eq!(qif(&p, &p, eps()).unwrap(), 0.0);
        // F = e^-1 exactly: p = (1, 0), q = (e^-1, 1 - e^-1)
        let q = dist(&[1.0 / E, 1.0 - 1.0 / E]);
        assert_abs_diff_eq!(qif(&dist(&[1.0, 0.0]), &q, eps()).unwrap(), 1.0 / E, epsilon = 1e-12);
        let disjoint = qif(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), eps()).unwrap();
        assert_abs_diff_eq!(disjoint, -1e-13 * (1e-13f64).ln(), epsilon = 1e-24);
        assert_abs_diff_eq!(disjoint, 2.993e-12, epsilon = 1e-15);
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.2, 0.8]);
        assert_eq!(kl(&p, &p, eps()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kl(&dist(&[1.0, 0.0]), &dist(&[0.5, 0.5]), eps()).unwrap(),
            LN_2,
            epsilon = 1e-15
        );
        let floored = kl(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), eps()).unwrap();
        assert_abs_diff_eq!(floored, 1e13f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(floored, 29.934, epsilon = 1e-3);
    }

    #[test]
    fn js_examples() {
        let p = dist(&[0.1, 0.9]);
        assert_eq!(js(&p, &p, eps()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            js(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), eps()).unwrap(),
            LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn transforms() {
        assert_abs_diff_eq!(g_transform(1.0 / E).unwrap(), -0.3679, epsilon = 1e-4);
        assert_abs_diff_eq!(g_transform(LN_2).unwrap(), -0.254, epsilon = 1e-3);
        assert_eq!(g_transform(1.0).unwrap(), 0.0);
        assert!(g_transform(0.0).is_err());
        assert!(g_transform(-1.0).is_err());

        assert_eq!(g_gradient_factor(1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(g_gradient_factor(1.0 / E).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g_gradient_factor(E).unwrap(), 2.0, epsilon = 1e-15);
        assert!(g_gradient_factor(0.0).is_err());

        assert_eq!(simple_fidelity_loss(1.0).unwrap(), 0.0);
        assert_eq!(simple_fidelity_loss(0.0).unwrap(), 1.0);
        assert_eq!(simple_fidelity_loss(0.5).unwrap(), 0.5);
        assert!(simple_fidelity_loss(1.1).is_err());
        assert!(simple_fidelity_loss(-0.1).is_err());
    }

    #[test]
    fn g_transform_sign_pattern_and_derivative() {
        for i in 1..1000 {
            let f = i as f64 * 0.01;
            let g = g_transform(f).unwrap();
            match f.partial_cmp(&1.0).unwrap() {
                std::cmp::Ordering::Less => assert!(g < 0.0, "f = {f}"),
                std::cmp::Ordering::Equal => assert_eq!(g, 0.0),
                std::cmp::Ordering::Greater => assert!(g > 0.0, "f = {f}"),
            }
        }
        // log-spaced f in [1e-3, 10]
        for i in 0..=200 {
            let f = 10f64.powf(-3.0 + 4.0 * i as f64 / 200.0);
            let h = 1e-6 * f;
            let numeric = (g_transform(f + h).unwrap() - g_transform(f - h).unwrap()) / (2.0 * h);
            let analytic = g_gradient_factor(f).unwrap();
            let tol = 1e-6 * analytic.abs().max(1.0);
            assert!((numeric - analytic).abs() <= tol, "f = {f}: {numeric} vs {analytic}");
        }
    }

    #[test]
    fn g_transform_on_js_range() {
        for i in 1..=10_000 {
            let f = LN_2 * i as f64 / 10_000.0;
            let g = g_transform(f).unwrap();
            assert!((-0.36788..=0.0).contains(&g), "f = {f}, g = {g}");
        }
    }

    #[test]
    fn bhattacharyya_examples() {
        let p = dist(&[0.25, 0.75]);
        assert_eq!(bhattacharyya_distance(&p, &p, eps()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            bhattacharyya_distance(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0]), eps()).unwrap(),
            -(0.5f64.sqrt()).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            bhattacharyya_distance(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0]), eps()).unwrap(),
            0.34657,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(
            bhattacharyya_distance(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0]), eps()).unwrap(),
            29.934,
            epsilon = 1e-3
        );
    }

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[k] += h;
        dn[k] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    }

    #[test]
    fn partials_match_finite_differences() {
        let p = [0.1, 0.25, 0.4, 0.25];
        let q = [0.3, 0.05, 0.15, 0.5];
        let e = 1e-13;
        let h = 1e-7;
        let check = |name: &str, analytic: Vec<f64>, f: &dyn Fn(&[f64]) -> f64, at: &[f64]| {
            assert_eq!(analytic.len(), at.len());
            for (k, &a) in analytic.iter().enumerate() {
                let numeric = central_diff(f, at, k, h);
                assert!(
                    (numeric - a).abs() <= 1e-6 * numeric.abs().max(1.0),
                    "{name}[{k}]: {numeric} vs {a}"
                );
            }
        };
        check("kl1", kl_partial_first(&p, &q, e), &|x| kl_slices(x, &q, e), &p);
        check("kl2", kl_partial_second(&p, &q, e), &|x| kl_slices(&p, x, e), &q);
        check("js1", js_partial_first(&p, &q, e), &|x| js_slices(x, &q, e), &p);
        let qif_raw = |x: &[f64]| {
            let b = overlap(x, &q);
            qif_from_fidelity(b * b, e)
        };
        check("qif1", qif_partial_first(&p, &q, e), &qif_raw, &p);
        let omf = |x: &[f64]| {
            let b = overlap(x, &q);
            1.0 - b * b
        };
        check("1-f", one_minus_f_partial_first(&p, &q, e), &omf, &p);
    }

    #[test]
    fn identical_inputs_have_zero_fidelity_partials() {
        let p = [0.1, 0.2, 0.7];
        assert!(qif_partial_first(&p, &p, 1e-13).iter().all(|&g| g == 0.0));
        assert!(one_minus_f_partial_first(&p, &p, 1e-13).iter().all(|&g| g == 0.0));
    }

    fn arb_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=64).prop_flat_map(|d| {
            (
                prop::collection::vec(0.0f64..1.0, d),
                prop::collection::vec(0.0f64..1.0, d),
            )
        })
    }

    fn norm(w: Vec<f64>) -> Option<DiscreteDistribution> {
        DiscreteDistribution::from_mass(w).ok()
    }

    proptest! {
        #[test]
        fn prop_bounds_and_symmetry((a, b) in arb_pair()) {
            let (Some(p), Some(q)) = (norm(a), norm(b)) else { return Ok(()); };
            let c = eps();
            let f = fidelity(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f, fidelity(&q, &p).unwrap());
            prop_assert!((fidelity(&p, &p).unwrap() - 1.0).abs() <= 1e-12);

            let d = qif(&p, &q, c).unwrap();
            prop_assert!((0.0..=1.0 / E + 1e-12).contains(&d));
            prop_assert_eq!(d, qif(&q, &p, c).unwrap());
            prop_assert_eq!(qif(&p, &p, c).unwrap(), 0.0);

            prop_assert!(kl(&p, &q, c).unwrap() >= -1e-12);
            prop_assert_eq!(kl(&p, &p, c).unwrap(), 0.0);

            let j = js(&p, &q, c).unwrap();
            prop_assert!((-1e-12..=LN_2 + 1e-12).contains(&j));
            prop_assert!((j - js(&q, &p, c).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn prop_qif_zero_iff_identical((a, b) in arb_pair()) {
            let (Some(p), Some(q)) = (norm(a), norm(b)) else { return Ok(()); };
            let d = qif(&p, &q, eps()).unwrap();
            if p != q {
                prop_assert!(d > 0.0);
            }
        }
    }
}
