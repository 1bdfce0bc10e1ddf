//! The one-body Hamiltonian `H_n`: a Jacobi matrix with the field on the
//! diagonal and unit couplings, together with its exact propagator
//! `e^{-2iH_n t}` and resolvent `(-2H_n - z)^{-1}`.

mod contour;
mod eigen;
mod propagator;
mod resolvent;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{generate, PotentialSpec};

pub use contour::{dunford_check, gauss_legendre, DunfordCheck, Rectangle};
pub use eigen::{eigensolve, eigenvalues, SpectralData, MAX_SWEEPS};
pub use propagator::{propagator_matrix, propagator_row, BoundaryPolicy, PropagatorRow, UNITARITY_TOLERANCE};
pub use resolvent::{
    combes_thomas_report, resolvent_column, CombesThomasRow, ResolventQuery,
};

pub(crate) use resolvent::solve_shifted;

/// Symmetric tridiagonal operator with unit off-diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::domain("operator size must be >= 1"));
        }
        Ok(TridiagonalOperator { diagonal })
    }

    pub fn n(&self) -> usize {
        self.diagonal.len()
    }

    /// `(H x)_j = x_{j-1} + V_j x_j + x_{j+1}` with Dirichlet ends.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| {
                let mut s = self.diagonal[j] * x[j];
                if j > 0 {
                    s += x[j - 1];
                }
                if j + 1 < n {
                    s += x[j + 1];
                }
                s
            })
            .collect()
    }

    pub fn sup_diagonal(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let lo = self.diagonal.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.diagonal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo - 2.0, hi + 2.0)
    }
}

pub fn build_hamiltonian(spec: &PotentialSpec, n: usize) -> Result<TridiagonalOperator> {
    let seq = generate(spec, n)?;
    TridiagonalOperator::new(seq.values)
}

/// Half-width `K` of the interval `[-K+1, K-1]` containing `σ(-2H_n)` for a
/// field with values in `{0, λ}`.
///
/// Uses `max{4, 2λ+5}`: the containment needs `K - 1 ≥ 2λ + 4`, which the
/// `min` form fails for every `λ > 1/2`.
pub fn spectral_bound(lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(f64::max(4.0, 2.0 * lambda + 5.0))
}
