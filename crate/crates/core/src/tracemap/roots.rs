//! Real zeros of `x_k` and the exponent `α′` built from the slopes there.
//!
//! The zeros of `x_k(E) = ½ tr Φ_L(E)` are the energies at which the
//! `L`-periodic operator has Bloch phase `π/2`, i.e. the eigenvalues of the
//! `L×L` Hermitian matrix with the field on the diagonal, unit couplings,
//! and corner couplings `±i`. Those eigenvalues seed a safeguarded Newton
//! polish in double-double arithmetic, since at large `k` the slope
//! `|x_k′|` is so steep that `|x_k|` cannot get below `10⁻⁹` at any `f64`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use super::{fibonacci_number, prop_close_bounds};
use crate::error::{Error, Result};
use crate::potential::{fib_value, PHI};

/// Largest generation accepted by [`band_roots`] (`F_{k+1} = 2584` zeros).
pub const MAX_ROOT_GENERATION: usize = 17;
/// Residual target for polished zeros.
pub const ROOT_RESIDUAL: f64 = 1e-9;
const POLISH_ITERATIONS: usize = 200;
const NARROW_WINDOW: f64 = 1e-9;

/// All real zeros of `x_k`, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRoots {
    pub lambda: f64,
    pub k: usize,
    /// Leading part of each zero.
    pub roots: Vec<f64>,
    /// Trailing part, so that `roots[j] + roots_lo[j]` is the double-double zero.
    pub roots_lo: Vec<f64>,
    /// `|x_k′(E_k^j)|`.
    pub derivative_abs: Vec<f64>,
    /// `|x_k(E_k^j)|` at the double-double zero.
    pub residuals: Vec<f64>,
}

impl BandRoots {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn min_derivative(&self) -> f64 {
        self.derivative_abs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// `k,j,root,root_lo,derivative_abs,residual` rows.
    pub fn to_csv(&self) -> crate::export::Csv {
        use crate::export::{Cell, Csv};
        let mut csv = Csv::new(&["k", "j", "root", "root_lo", "derivative_abs", "residual"]);
        for j in 0..self.count() {
            csv.row(&[
                Cell::U(self.k as u64),
                Cell::U(j as u64 + 1),
                Cell::F(self.roots[j]),
                Cell::F(self.roots_lo[j]),
                Cell::F(self.derivative_abs[j]),
                Cell::F(self.residuals[j]),
            ]);
        }
        csv
    }
}

/// `(x_k(E), x_k′(E))` in double-double arithmetic for real `E`.
fn orbit_dd(e: TwoFloat, lambda: f64, k: usize) -> (TwoFloat, TwoFloat) {
    let half = TwoFloat::from(0.5);
    let (mut x3, mut x2, mut x1) = (TwoFloat::from(1.0), e * half, (e - lambda) * half);
    let (mut d3, mut d2, mut d1) = (TwoFloat::from(0.0), half, half);
    if k == 0 {
        return (x2, d2);
    }
    for _ in 2..=k {
        let x = (x1 * x2) * 2.0 - x3;
        let d = (d1 * x2 + x1 * d2) * 2.0 - d3;
        (x3, x2, x1) = (x2, x1, x);
        (d3, d2, d1) = (d2, d1, d);
    }
    (x1, d1)
}

fn sign(x: TwoFloat) -> Result<i8> {
    let h = x.hi();
    if h.is_nan() {
        return Err(Error::numeric("x_k evaluation produced NaN"));
    }
    Ok(if h > 0.0 {
        1
    } else if h < 0.0 {
        -1
    } else {
        0
    })
}

/// Eigenvalues of the Bloch-phase-`π/2` operator of period `l` at `ω = 0`.
fn floquet_eigenvalues(lambda: f64, l: usize) -> Result<Vec<f64>> {
    let mut h = DMatrix::<Complex64>::zeros(l, l);
    for j in 0..l {
        h[(j, j)] = Complex64::new(fib_value(j as u64 + 1, lambda, 0.0)?, 0.0);
        if j + 1 < l {
            h[(j, j + 1)] += Complex64::new(1.0, 0.0);
            h[(j + 1, j)] += Complex64::new(1.0, 0.0);
        }
    }
    // u(l) = i·u(0)
    h[(l - 1, 0)] += Complex64::new(0.0, 1.0);
    h[(0, l - 1)] += Complex64::new(0.0, -1.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Safeguarded Newton on `[a, b]`, where `x_k` changes sign.
fn polish(guess: f64, a: f64, b: f64, lambda: f64, k: usize) -> Result<Option<TwoFloat>> {
    let (mut lo, mut hi) = (TwoFloat::from(a), TwoFloat::from(b));
    let s_lo = sign(orbit_dd(lo, lambda, k).0)?;
    let s_hi = sign(orbit_dd(hi, lambda, k).0)?;
    if s_lo == 0 {
        return Ok(Some(lo));
    }
    if s_hi == 0 {
        return Ok(Some(hi));
    }
    if s_lo == s_hi {
        return Ok(None);
    }
    let mut e = TwoFloat::from(guess);
    for _ in 0..POLISH_ITERATIONS {
        let (x, d) = orbit_dd(e, lambda, k);
        let s = sign(x)?;
        if s == 0 {
            return Ok(Some(e));
        }
        if s == s_lo {
            lo = e;
        } else {
            hi = e;
        }
        let newton = e - x / d;
        let inside = d.hi().is_finite() && d.hi() != 0.0 && newton > lo.min(hi) && newton < lo.max(hi);
        let next = if inside { newton } else { (lo + hi) * 0.5 };
        let step = (next - e).abs();
        e = next;
        if step.hi() <= 1e-30 * e.hi().abs().max(1.0) {
            break;
        }
    }
    Ok(Some(e))
}

/// Polishes one eigenvalue, first inside a narrow window (far from the
/// spectrum `x_k` overflows even in double-double) and then out to the
/// midpoints with its neighbours.
fn polish_root(guess: f64, left: f64, right: f64, lambda: f64, k: usize) -> Result<TwoFloat> {
    let narrow = NARROW_WINDOW * guess.abs().max(1.0);
    let windows = [
        (guess - narrow.min(guess - left), guess + narrow.min(right - guess)),
        (left, right),
    ];
    for (a, b) in windows {
        if let Some(root) = polish(guess, a, b, lambda, k)? {
            return Ok(root);
        }
    }
    Err(Error::numeric(format!("no sign change of x_{k} around the Floquet eigenvalue {guess}")))
}

/// All `F_{k+1}` real zeros of `x_k` (with `F_1 = F_2 = 1`), i.e. one per
/// band of the period-`F_{k+1}` approximant.
pub fn band_roots(lambda: f64, k: usize) -> Result<BandRoots> {
    if k == 0 {
        return Err(Error::domain("generation k must be >= 1"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("coupling must be > 0"));
    }
    if k > MAX_ROOT_GENERATION {
        return Err(Error::Resource(format!("generation {k} exceeds {MAX_ROOT_GENERATION}")));
    }
    let l = fibonacci_number(k as u32 + 1)? as usize;
    let guesses = floquet_eigenvalues(lambda, l)?;
    let mut edges = Vec::with_capacity(l + 1);
    edges.push(guesses[0] - 1.0);
    edges.extend(guesses.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(guesses[l - 1] + 1.0);
    let polished = (0..l)
        .into_par_iter()
        .map(|j| polish_root(guesses[j], edges[j], edges[j + 1], lambda, k))
        .collect::<Result<Vec<_>>>()?;
    if polished.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::numeric(format!("x_{k}: polished zeros are not distinct (found {l} candidates)")));
    }
    let mut out = BandRoots {
        lambda,
        k,
        roots: Vec::with_capacity(l),
        roots_lo: Vec::with_capacity(l),
        derivative_abs: Vec::with_capacity(l),
        residuals: Vec::with_capacity(l),
    };
    for e in polished {
        let (x, d) = orbit_dd(e, lambda, k);
        out.roots.push(e.hi());
        out.roots_lo.push(e.lo());
        out.derivative_abs.push(d.hi().abs());
        out.residuals.push(x.hi().abs());
    }
    if out.count() != l {
        return Err(Error::numeric(format!("x_{k}: found {} zeros, expected {l}", out.count())));
    }
    if out.max_residual() > ROOT_RESIDUAL {
        return Err(Error::numeric(format!("x_{k}: polish residual {:.2e}", out.max_residual())));
    }
    Ok(out)
}

/// `α′ = ln φ / lim (1/k) ln min_j |x_k′(E_k^j)|`, estimated on `k_min..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrimeEstimate {
    pub lambda: f64,
    pub ks: Vec<usize>,
    /// `y_k = (1/k) ln min_j |x_k′(E_k^j)|`.
    pub y_k: Vec<f64>,
    /// Increments `k·y_k - (k-1)·y_{k-1}`, aligned with `ks[1..]`.
    pub increments: Vec<f64>,
    /// Mean of the last two increments, the estimate of `lim y_k`.
    pub limit: f64,
    pub alpha_prime: f64,
    /// Analytic bracket at this coupling, where defined.
    pub bracket: [Option<f64>; 2],
}

impl AlphaPrimeEstimate {
    /// `k,y_k,log_min_derivative` rows.
    pub fn to_csv(&self) -> crate::export::Csv {
        use crate::export::{Cell, Csv};
        let mut csv = Csv::new(&["k", "y_k", "log_min_derivative"]);
        for (k, y) in self.ks.iter().zip(&self.y_k) {
            csv.row(&[Cell::U(*k as u64), Cell::F(*y), Cell::F(*y * *k as f64)]);
        }
        csv
    }
}

/// Largest relative change between the last two pair means of increments.
pub const STABILIZATION_TOLERANCE: f64 = 0.1;

pub fn alpha_prime(lambda: f64, k_min: usize, k_max: usize) -> Result<AlphaPrimeEstimate> {
    if k_min == 0 || k_max < k_min + 2 {
        return Err(Error::domain("alpha_prime needs 1 <= k_min and k_max >= k_min + 2"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("coupling must be > 0"));
    }
    let ks: Vec<usize> = (k_min..=k_max).collect();
    let log_min = ks
        .iter()
        .map(|&k| band_roots(lambda, k).map(|r| r.min_derivative().ln()))
        .collect::<Result<Vec<f64>>>()?;
    if log_min.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite minimal slope"));
    }
    let y_k: Vec<f64> = ks.iter().zip(&log_min).map(|(k, l)| l / *k as f64).collect();
    let increments: Vec<f64> = log_min.windows(2).map(|w| w[1] - w[0]).collect();
    let n = increments.len();
    let limit = 0.5 * (increments[n - 2] + increments[n - 1]);
    // increments alternate with period two, so successive pair means are compared
    let stable = if n >= 3 {
        let previous = 0.5 * (increments[n - 3] + increments[n - 2]);
        (limit - previous).abs() <= STABILIZATION_TOLERANCE * limit
    } else {
        increments.iter().all(|d| *d > 0.0)
    };
    if !(limit > 0.0) || !stable {
        return Err(Error::numeric(format!(
            "no stabilization: increments of k·y_k {:?}",
            &increments[n.saturating_sub(3)..]
        )));
    }
    let (lo, hi) = prop_close_bounds(lambda)?;
    Ok(AlphaPrimeEstimate {
        lambda,
        ks,
        y_k,
        increments,
        limit,
        alpha_prime: PHI.ln() / limit,
        bracket: [lo, hi],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_generations_closed_form() {
        let r = band_roots(3.0, 1).unwrap();
        assert_eq!(r.roots, vec![3.0]);
        assert_eq!(r.derivative_abs, vec![0.5]);
        // E(E-λ) = 2
        let lambda = 5.0;
        let r = band_roots(lambda, 2).unwrap();
        let disc = (lambda * lambda + 8.0f64).sqrt();
        let want = [(lambda - disc) / 2.0, (lambda + disc) / 2.0];
        for (got, want) in r.roots.iter().zip(want) {
            assert!((got - want).abs() < 1e-14);
        }
        assert!(band_roots(1.0, 0).is_err());
        assert!(band_roots(0.0, 3).is_err());
    }

    #[test]
    fn counts_and_residuals() {
        for lambda in [8.0, 12.0] {
            for k in 1..=12 {
                let r = band_roots(lambda, k).unwrap();
                assert_eq!(r.count() as u64, fibonacci_number(k as u32 + 1).unwrap());
                assert!(r.max_residual() <= ROOT_RESIDUAL, "λ={lambda} k={k} {}", r.max_residual());
                assert!(r.roots.iter().all(|e| (-3.0..=lambda + 3.0).contains(e)));
            }
        }
    }

    #[test]
    fn alpha_prime_inside_brackets() {
        let a = alpha_prime(12.0, 8, 12).unwrap();
        assert!((0.20..=0.55).contains(&a.alpha_prime), "{a:?}");
        let [lo, hi] = a.bracket;
        assert!(lo.unwrap() < a.alpha_prime && a.alpha_prime < hi.unwrap());
        let a = alpha_prime(24.0, 8, 12).unwrap();
        assert!((0.18..=0.37).contains(&a.alpha_prime), "{a:?}");
        let a = alpha_prime(8.0, 3, 14).unwrap();
        assert!(a.y_k.iter().all(|y| y.is_finite() && *y > 0.0));
        assert!(alpha_prime(8.0, 3, 4).is_err());
    }

    #[test]
    fn orbit_dd_agrees_with_plain_orbit() {
        let o = super::super::trace_orbit(Complex64::new(0.81, 0.0), 2.0, 8).unwrap();
        let (x, d) = orbit_dd(TwoFloat::from(0.81), 2.0, 8);
        assert!((x.hi() - o.x(8).to_complex().re).abs() < 1e-10);
        assert!((d.hi() - o.dx(8).to_complex().re).abs() < 1e-9 * d.hi().abs().max(1.0));
    }
}
