use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpectralData;
use crate::error::{Error, Result};

/// One row `F_{jk}(t) = (e^{-2iH_n t})_{jk}`, `k = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorRow {
    pub t: f64,
    /// 1-based source site.
    pub j: usize,
    pub amplitudes: Vec<Complex64>,
}

impl PropagatorRow {
    pub fn n(&self) -> usize {
        self.amplitudes.len()
    }

    /// `|F_{jk}|` at 1-based `k`.
    pub fn abs(&self, k: usize) -> f64 {
        self.amplitudes[k - 1].norm()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `Σ_{k > n - margin} |F_{jk}|²`.
    pub fn tail_weight(&self, margin: usize) -> f64 {
        let n = self.n();
        self.amplitudes[n.saturating_sub(margin)..].iter().map(|a| a.norm_sqr()).sum()
    }
}

/// When a finite chain stands in for the half-line: the weight on the last
/// `margin` sites must stay below `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolicy {
    pub margin: usize,
    pub tolerance: f64,
}

impl Default for BoundaryPolicy {
    fn default() -> Self {
        BoundaryPolicy { margin: 20, tolerance: 1e-10 }
    }
}

impl BoundaryPolicy {
    pub fn check(&self, row: &PropagatorRow) -> Result<()> {
        let w = self.tail_weight(row);
        if w > self.tolerance {
            return Err(Error::BoundaryReached(format!(
                "weight {w:.3e} on the last {} of {} sites at t={} exceeds {:.1e}",
                self.margin,
                row.n(),
                row.t,
                self.tolerance
            )));
        }
        Ok(())
    }

    pub fn tail_weight(&self, row: &PropagatorRow) -> f64 {
        row.tail_weight(self.margin)
    }
}

/// `F_{jk}(t) = Σ_m Q_{jm} e^{-2iE_m t} Q_{km}`.
pub fn propagator_row(spectral: &SpectralData, j: usize, t: f64) -> Result<PropagatorRow> {
    let n = spectral.n();
    if j == 0 || j > n {
        return Err(Error::domain(format!("source site {j} outside 1..={n}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    let row = PropagatorRow { t, j, amplitudes: row_unchecked(spectral, j - 1, t) };
    let defect = (row.norm_sqr() - 1.0).abs();
    if defect > UNITARITY_TOLERANCE {
        return Err(Error::numeric(format!("row {j} at t={t} has norm² defect {defect:.2e}")));
    }
    Ok(row)
}

/// Allowed `|Σ_k |F_{jk}|² - 1|` on every computed row.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

pub(crate) fn row_unchecked(spectral: &SpectralData, j0: usize, t: f64) -> Vec<Complex64> {
    let n = spectral.n();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for m in 0..n {
        let qj = spectral.q(j0, m);
        if qj == 0.0 {
            continue;
        }
        let (s, c) = (-2.0 * spectral.eigenvalues[m] * t).sin_cos();
        let (wr, wi) = (qj * c, qj * s);
        for ((r, i), q) in re.iter_mut().zip(im.iter_mut()).zip(spectral.vector(m)) {
            *r += wr * q;
            *i += wi * q;
        }
    }
    re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
}

/// The full matrix `e^{-2iH_n t}`, row-major. Intended for small `n`.
pub fn propagator_matrix(spectral: &SpectralData, t: f64) -> Vec<Vec<Complex64>> {
    (0..spectral.n()).map(|j| row_unchecked(spectral, j, t)).collect()
}
