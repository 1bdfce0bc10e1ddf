use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{eigenvalues, TridiagonalOperator};
use crate::error::{Error, Result};
use crate::fit::fit_line;

/// Spectral parameter `z = E + iε` and 1-based column site `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventQuery {
    pub z: Complex64,
    pub m: usize,
}

impl ResolventQuery {
    pub fn new(energy: f64, eps: f64, m: usize) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::domain(format!("resolvent needs eps > 0, got {eps}")));
        }
        Ok(ResolventQuery { z: Complex64::new(energy, eps), m })
    }

    /// `ε = min{1/t, 1}` as used when a resolvent is driven from time `t`.
    pub fn from_time(energy: f64, t: f64, m: usize) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::domain("time must be > 0"));
        }
        Self::new(energy, (1.0 / t).min(1.0), m)
    }
}

#[inline]
fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Solves `(-2T - z) x = δ_m` (0-based `m0`) by tridiagonal elimination
/// with partial pivoting. `z` may be anywhere off `σ(-2T)`.
pub(crate) fn solve_shifted(op: &TridiagonalOperator, z: Complex64, m0: usize) -> Result<Vec<Complex64>> {
    let n = op.n();
    let off = Complex64::new(-2.0, 0.0);
    let mut d: Vec<Complex64> = op.diagonal.iter().map(|v| Complex64::new(-2.0 * v, 0.0) - z).collect();
    let mut dl = vec![off; n.saturating_sub(1)];
    let mut du = vec![off; n.saturating_sub(1)];
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    b[m0] = Complex64::new(1.0, 0.0);
    let singular = || Error::numeric("singular tridiagonal system (z on the spectrum)");

    if n > 1 {
        for i in 0..n - 1 {
            if cabs1(d[i]) >= cabs1(dl[i]) {
                if d[i] == Complex64::new(0.0, 0.0) {
                    return Err(singular());
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                let bi = b[i];
                b[i + 1] -= fact * bi;
                dl[i] = Complex64::new(0.0, 0.0);
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                } else {
                    dl[i] = Complex64::new(0.0, 0.0);
                }
                du[i] = temp;
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - fact * b[i + 1];
            }
        }
    }
    if d[n - 1] == Complex64::new(0.0, 0.0) {
        return Err(singular());
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
        }
    }
    Ok(b)
}

/// Column `m` of `(-2T - z)^{-1}`.
pub fn resolvent_column(op: &TridiagonalOperator, q: &ResolventQuery) -> Result<Vec<Complex64>> {
    if q.z.im == 0.0 || !q.z.im.is_finite() || !q.z.re.is_finite() {
        return Err(Error::domain("resolvent needs Im z != 0"));
    }
    if q.m == 0 || q.m > op.n() {
        return Err(Error::domain(format!("column {} outside 1..={}", q.m, op.n())));
    }
    solve_shifted(op, q.z, q.m - 1)
}

/// Fitted off-diagonal decay of the resolvent at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombesThomasRow {
    pub eps: f64,
    /// `min{dist(z, σ(-2T)), 1}`.
    pub d: f64,
    /// Fitted rate in `|R_{lm}| ~ e^{-ρ|l-m|}`.
    pub rho: f64,
    pub rho_over_d: f64,
    /// Largest `|R_{lm}| / (2 d⁻¹ e^{-ρ|l-m|/2})` over the sampled pairs; `≤ 1` means the bound holds.
    pub audit_ratio: f64,
}

pub fn combes_thomas_report(
    op: &TridiagonalOperator,
    energy: f64,
    eps_list: &[f64],
    pairs: &[(usize, usize)],
) -> Result<Vec<CombesThomasRow>> {
    if pairs.len() < 3 {
        return Err(Error::domain("Combes-Thomas fit needs at least 3 site pairs"));
    }
    let n = op.n();
    if pairs.iter().any(|&(l, m)| l == 0 || m == 0 || l > n || m > n) {
        return Err(Error::domain("site pair outside the chain"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::domain("every eps must be > 0"));
    }
    let spectrum: Vec<f64> = eigenvalues(op)?.into_iter().map(|e| -2.0 * e).collect();
    let mut by_column: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(l, m) in pairs {
        by_column.entry(m).or_default().push(l);
    }

    eps_list
        .iter()
        .map(|&eps| {
            let z = Complex64::new(energy, eps);
            let dist = spectrum
                .iter()
                .map(|s| ((energy - s).powi(2) + eps * eps).sqrt())
                .fold(f64::INFINITY, f64::min);
            let d = dist.min(1.0);
            let mut samples = Vec::with_capacity(pairs.len());
            for (&m, rows) in &by_column {
                let col = solve_shifted(op, z, m - 1)?;
                for &l in rows {
                    samples.push(((l as f64 - m as f64).abs(), col[l - 1].norm()));
                }
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().map(|&(r, a)| (r, a.ln())).unzip();
            let rho = -fit_line(&xs, &ys)?.slope;
            let audit_ratio = samples
                .iter()
                .map(|&(r, a)| a / (2.0 / d * (-rho * r / 2.0).exp()))
                .fold(0.0, f64::max);
            Ok(CombesThomasRow { eps, d, rho, rho_over_d: rho / d, audit_ratio })
        })
        .collect()
}
