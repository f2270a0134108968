//! Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` evaluated with dense eigendecompositions.
//!
//! Only used to certify that the classical overlap in
//! [`fidelity`](crate::divergence::fidelity) equals the density-matrix
//! fidelity of the amplitude-encoded pure states `|p⟩ = Σ √p_i |i⟩`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_ORACLE_DIM: usize = 16;
const NORM_TOLERANCE: f64 = 1e-9;

/// Amplitude vectors of two real pure states over the same `d <= 16` basis.
#[derive(Debug, Clone)]
pub struct PureStateOracleInput {
    amplitudes_p: Vec<f64>,
    amplitudes_q: Vec<f64>,
}

impl PureStateOracleInput {
    pub fn new(amplitudes_p: Vec<f64>, amplitudes_q: Vec<f64>) -> Result<Self> {
        if amplitudes_p.len() != amplitudes_q.len() {
            return Err(Error::DimensionMismatch(amplitudes_p.len(), amplitudes_q.len()));
        }
        let d = amplitudes_p.len();
        if d == 0 {
            return Err(Error::EmptyDistribution);
        }
        if d > MAX_ORACLE_DIM {
            return Err(Error::OracleDimension {
                got: d,
                max: MAX_ORACLE_DIM,
            });
        }
        for amps in [&amplitudes_p, &amplitudes_q] {
            if let Some((index, &value)) = amps.iter().enumerate().find(|(_, a)| !(**a >= 0.0 && a.is_finite())) {
                return Err(Error::InvalidWeight { index, value });
            }
            let norm: f64 = amps.iter().map(|a| a * a).sum();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::AmplitudesNotNormalized(norm));
            }
        }
        Ok(Self {
            amplitudes_p,
            amplitudes_q,
        })
    }

    /// Amplitude encoding `√p`, `√q` of two probability vectors.
    pub fn from_probabilities(p: &[f64], q: &[f64]) -> Result<Self> {
        Self::new(
            p.iter().map(|x| x.sqrt()).collect(),
            q.iter().map(|x| x.sqrt()).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.amplitudes_p.len()
    }
}

fn projector(amps: &[f64]) -> DMatrix<f64> {
    let v = DVector::from_column_slice(amps);
    &v * v.transpose()
}

/// Eigenvalues below this fraction of the spectral scale are solver noise.
fn noise_floor(eigenvalues: &DVector<f64>) -> f64 {
    let scale = eigenvalues.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    64.0 * f64::EPSILON * scale
}

/// Principal square root of a symmetric positive semi-definite matrix.
fn psd_sqrt(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    let floor = noise_floor(&eig.eigenvalues);
    let roots = eig.eigenvalues.map(|l| if l > floor { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `(Tr √(√ρ σ √ρ))²` for symmetric PSD `rho`, `sigma` of equal size.
pub fn uhlmann_fidelity(rho: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch(rho.nrows(), sigma.nrows()));
    }
    let sqrt_rho = psd_sqrt(rho.clone());
    let inner = &sqrt_rho * sigma * &sqrt_rho;
    // symmetrize away rounding before the second decomposition
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    let floor = noise_floor(&eig.eigenvalues);
    let trace: f64 = eig.eigenvalues.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum();
    Ok((trace * trace).clamp(0.0, 1.0))
}

/// Fidelity of the rank-one density matrices built from the input amplitudes.
pub fn fidelity_oracle(input: &PureStateOracleInput) -> Result<f64> {
    uhlmann_fidelity(&projector(&input.amplitudes_p), &projector(&input.amplitudes_q))
}
