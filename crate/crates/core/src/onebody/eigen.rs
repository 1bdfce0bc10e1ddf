use serde::{Deserialize, Serialize};

use super::TridiagonalOperator;
use crate::error::{Error, Result};

/// Iteration cap per eigenvalue for the implicit QL sweeps.
pub const MAX_SWEEPS: usize = 50;

/// Eigenvalues in ascending order with orthonormal eigenvectors.
///
/// `vectors` is row-major with row `m` holding eigenvector `m`, so
/// `Q_{km} = vectors[m * n + k]` (0-based).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<f64>,
    n: usize,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vector(&self, m: usize) -> &[f64] {
        &self.vectors[m * self.n..(m + 1) * self.n]
    }

    /// `Q_{km}` with 0-based `k` (site) and `m` (mode).
    #[inline]
    pub fn q(&self, k: usize, m: usize) -> f64 {
        self.vectors[m * self.n + k]
    }

    /// Largest `‖H v_m - E_m v_m‖`.
    pub fn max_residual(&self, op: &TridiagonalOperator) -> f64 {
        (0..self.n)
            .map(|m| {
                let v = self.vector(m);
                let hv = op.apply(v);
                let e = self.eigenvalues[m];
                hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|⟨v_a, v_b⟩ - δ_ab|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.n {
            for b in a..self.n {
                let dot: f64 = self.vector(a).iter().zip(self.vector(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Implicit-shift QL on the tridiagonal `(d, e)`; `e[i]` couples `i` and `i+1`.
/// When `vectors` is given, rotations are accumulated on its rows.
fn tql(d: &mut [f64], e: &mut [f64], mut vectors: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::numeric(format!(
                    "tridiagonal QL failed to converge at eigenvalue index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = vectors.as_deref_mut() {
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Full spectral factorisation of `H_n`.
pub fn eigensolve(op: &TridiagonalOperator) -> Result<SpectralData> {
    let n = op.n();
    let mut d = op.diagonal.clone();
    let mut e = vec![1.0; n];
    e[n - 1] = 0.0;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql(&mut d, &mut e, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend_from_slice(&z[i * n..(i + 1) * n]);
    }
    Ok(SpectralData { eigenvalues, vectors, n })
}

/// Ascending eigenvalues only.
pub fn eigenvalues(op: &TridiagonalOperator) -> Result<Vec<f64>> {
    let n = op.n();
    let mut d = op.diagonal.clone();
    let mut e = vec![1.0; n];
    e[n - 1] = 0.0;
    tql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}
