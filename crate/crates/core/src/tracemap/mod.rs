//! Transfer matrices of `u(m+1) + u(m-1) + V_m u(m) = z u(m)`, the
//! Fibonacci trace map and the quantities built from it.
//!
//! Index convention: `x_M = ½ tr Φ_L(z, 0)` over the first `L` sites, where
//! `L = F_{M+1}` with `F_1 = F_2 = 1` (equivalently the `M`-th Fibonacci
//! number when counting from `F_0 = F_1 = 1`). So `x_1` covers one site,
//! `x_2` two, `x_3` three, `x_4` five, and `x_M` is a polynomial of degree
//! `F_{M+1}` in `z`.
//!
//! The trace does not depend on the multiplication order:
//! `Tᵀ = S T S` with `S = diag(1, -1)` for every one-step matrix, hence
//! `tr(T_1 ⋯ T_m) = tr(T_m ⋯ T_1)`.

mod checks;
mod roots;
mod scaled;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{generate, PotentialSpec, PHI};

pub use checks::{growth_rate_check, phase_independence_check, GrowthReport, Parity, PhaseReport, PhaseRow};
pub use roots::{alpha_prime, band_roots, AlphaPrimeEstimate, BandRoots};
pub use scaled::ScaledComplex;

/// Largest `l` accepted by [`fibonacci_number`].
pub const FIB_MAX_INDEX: u32 = 90;

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub entries: [[Complex64; 2]; 2],
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let (o, l) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        TransferMatrix { entries: [[l, o], [o, l]] }
    }

    /// `((z - v, -1), (1, 0))`.
    pub fn step(z: Complex64, v: f64) -> Self {
        let (o, l) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        TransferMatrix { entries: [[z - v, -l], [l, o]] }
    }

    pub fn det(&self) -> Complex64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// `|det - 1| / max(1, ‖Φ‖²)`; the determinant of a long product can
    /// only be resolved relative to the size of its entries.
    pub fn det_defect(&self) -> f64 {
        (self.det() - 1.0).norm() / self.norm().powi(2).max(1.0)
    }

    pub fn half_trace(&self) -> Complex64 {
        0.5 * self.trace()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mul(&self, rhs: &TransferMatrix) -> TransferMatrix {
        let (a, b) = (&self.entries, &rhs.entries);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TransferMatrix { entries: out }
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let e = &self.entries;
        [e[0][0] * v[0] + e[0][1] * v[1], e[1][0] * v[0] + e[1][1] * v[1]]
    }
}

/// `Φ = T(V_m) ⋯ T(V_1)` for `values = [V_1, …, V_m]`, so that
/// `(u(m+1), u(m)) = Φ (u(1), u(0))`.
pub fn transfer_product(values: &[f64], z: Complex64) -> TransferMatrix {
    values
        .iter()
        .fold(TransferMatrix::identity(), |acc, &v| TransferMatrix::step(z, v).mul(&acc))
}

/// `T(V_1) ⋯ T(V_m)`, the opposite multiplication order.
pub fn transfer_product_reversed(values: &[f64], z: Complex64) -> TransferMatrix {
    values
        .iter()
        .fold(TransferMatrix::identity(), |acc, &v| acc.mul(&TransferMatrix::step(z, v)))
}

/// `Φ_m(z, ω)` for the field described by `spec`, with `omega` replacing
/// the spec's phase.
pub fn transfer_matrix(spec: &PotentialSpec, z: Complex64, m: usize, omega: f64) -> Result<TransferMatrix> {
    if m == 0 {
        return Ok(TransferMatrix::identity());
    }
    let spec = PotentialSpec { omega, ..spec.clone() };
    let values = generate(&spec, m)?.values;
    Ok(transfer_product(&values, z))
}

/// Trace-map orbit `x_{-1}, x_0, …, x_{M_max}` with its `z`-derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOrbit {
    pub z: Complex64,
    pub lambda: f64,
    /// `values[i] = x_{i-1}`.
    pub values: Vec<ScaledComplex>,
    pub derivatives: Vec<ScaledComplex>,
}

impl TraceOrbit {
    pub fn m_max(&self) -> usize {
        self.values.len() - 2
    }

    /// `x_M` for `M ≥ -1`.
    pub fn x(&self, m: i64) -> ScaledComplex {
        self.values[(m + 1) as usize]
    }

    pub fn dx(&self, m: i64) -> ScaledComplex {
        self.derivatives[(m + 1) as usize]
    }

    /// `|x_{M+1} - (2x_M x_{M-1} - x_{M-2})| / max(1, |x_{M+1}|)` for `M = 1..M_max-1`.
    pub fn recursion_residuals(&self) -> Vec<f64> {
        (2..=self.m_max() as i64)
            .map(|m| {
                let next = self.x(m);
                let rec = (self.x(m - 1) * self.x(m - 2)).scale_pow2(1) - self.x(m - 3);
                rel_defect(next - rec, next.ln_abs().max(0.0))
            })
            .collect()
    }

    /// Fricke invariant `x²_{M+1} + x²_M + x²_{M-1} - 2x_{M+1}x_M x_{M-1} - 1`
    /// at every consecutive triple, starting with `(x_1, x_0, x_{-1})`.
    pub fn fricke_values(&self) -> Vec<Complex64> {
        (0..=self.m_max() as i64 - 1).map(|m| self.fricke_at(m).0.to_complex()).collect()
    }

    /// Deviation of the Fricke invariant from `λ²/4`, relative to the
    /// largest term entering it (at least `max(1, λ²/4)`).
    pub fn fricke_defects(&self) -> Vec<f64> {
        let target = ScaledComplex::from_real(self.lambda * self.lambda / 4.0);
        (0..=self.m_max() as i64 - 1)
            .map(|m| {
                let (value, ln_scale) = self.fricke_at(m);
                let floor = (self.lambda * self.lambda / 4.0).max(1.0).ln();
                rel_defect(value - target, ln_scale.max(floor))
            })
            .collect()
    }

    fn fricke_at(&self, m: i64) -> (ScaledComplex, f64) {
        let (a, b, c) = (self.x(m + 1), self.x(m), self.x(m - 1));
        let one = ScaledComplex::from_real(1.0);
        let terms = [a * a, b * b, c * c, (a * b * c).scale_pow2(1)];
        let value = terms[0] + terms[1] + terms[2] - terms[3] - one;
        let ln_scale = terms.iter().map(|t| t.ln_abs()).fold(f64::NEG_INFINITY, f64::max);
        (value, ln_scale)
    }
}

fn rel_defect(diff: ScaledComplex, ln_scale: f64) -> f64 {
    if diff.is_zero() {
        return 0.0;
    }
    (diff.ln_abs() - ln_scale).exp()
}

/// Runs the trace map from `x_{-1} = 1, x_0 = z/2, x_1 = (z-λ)/2` with
/// `x_{M+1} = 2x_M x_{M-1} - x_{M-2}`, and the differentiated recursion
/// from `0, ½, ½`.
pub fn trace_orbit(z: Complex64, lambda: f64, m_max: usize) -> Result<TraceOrbit> {
    if m_max < 2 {
        return Err(Error::domain("trace orbit needs M_max >= 2"));
    }
    if !(lambda.is_finite() && z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("non-finite trace-map input"));
    }
    let half = ScaledComplex::from_real(0.5);
    let mut values = vec![
        ScaledComplex::from_real(1.0),
        ScaledComplex::from_complex(z / 2.0),
        ScaledComplex::from_complex((z - lambda) / 2.0),
    ];
    let mut derivatives = vec![ScaledComplex::ZERO, half, half];
    for m in 2..=m_max {
        let i = m + 1;
        let (x1, x2, x3) = (values[i - 1], values[i - 2], values[i - 3]);
        let (d1, d2, d3) = (derivatives[i - 1], derivatives[i - 2], derivatives[i - 3]);
        let x = (x1 * x2).scale_pow2(1) - x3;
        let d = (d1 * x2 + x1 * d2).scale_pow2(1) - d3;
        if !x.is_finite() || !d.is_finite() {
            return Err(Error::numeric(format!(
                "trace-map orbit left the representable range; last valid M = {}",
                m - 1
            )));
        }
        values.push(x);
        derivatives.push(d);
    }
    Ok(TraceOrbit { z, lambda, values, derivatives })
}

/// `F_l` with `F_1 = F_2 = 1`.
pub fn fibonacci_number(l: u32) -> Result<u64> {
    if l == 0 {
        return Err(Error::domain("Fibonacci index must be >= 1"));
    }
    if l > FIB_MAX_INDEX {
        return Err(Error::domain(format!("F_{l} is outside the supported range l <= {FIB_MAX_INDEX}")));
    }
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 1..l {
        (a, b) = (b, a + b);
    }
    Ok(b)
}

/// Exact check of `φ^l/√5 - 1/2 ≤ F_l ≤ φ^l/√5 + 1/2`.
///
/// `φ^l/√5 - F_l = ψ^l/√5` with `ψ = -1/φ`, and with the Lucas number
/// `L_l`, `L_l² - 5F_l² = 4(-1)^l` gives `|ψ^l| = 4/(L_l + F_l√5)`. The
/// bound `|ψ^l| ≤ √5/2` then reads `8 ≤ √5(L_l + F_l√5) = √5 L_l + 5F_l`,
/// implied by `5F_l + 2L_l ≥ 8`.
pub fn fibonacci_sandwich(l: u32) -> Result<bool> {
    let f = fibonacci_number(l)? as u128;
    let lucas = fibonacci_number(l + 1)? as u128 + if l == 1 { 0 } else { fibonacci_number(l - 1)? as u128 };
    let identity = if l % 2 == 0 { lucas * lucas == 5 * f * f + 4 } else { lucas * lucas + 4 == 5 * f * f };
    Ok(identity && 5 * f + 2 * lucas >= 4)
}

/// Analytic bracket for the upper transport exponent at coupling `λ`:
/// lower `2 ln φ / ln(2λ + 22)` for `λ > √24`, upper `2 ln φ / ln ξ(λ)`
/// with `ξ(λ) = ½(λ - 4 + √((λ-4)² - 12))` for `λ ≥ 8`.
pub fn prop_close_bounds(lambda: f64) -> Result<(Option<f64>, Option<f64>)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("coupling must be > 0"));
    }
    let two_ln_phi = 2.0 * PHI.ln();
    let lower = (lambda > 24f64.sqrt()).then(|| two_ln_phi / (2.0 * lambda + 22.0).ln());
    let upper = (lambda >= 8.0).then(|| {
        let xi = 0.5 * (lambda - 4.0 + ((lambda - 4.0).powi(2) - 12.0).sqrt());
        two_ln_phi / xi.ln()
    });
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn transfer_basics() {
        let spec = PotentialSpec::fibonacci(3.0, 0.0);
        let z = Complex64::new(0.7, 0.2);
        assert_eq!(transfer_matrix(&spec, z, 0, 0.0).unwrap(), TransferMatrix::identity());
        let one = transfer_matrix(&spec, z, 1, 0.0).unwrap();
        assert_eq!(one, TransferMatrix::step(z, 3.0));
        assert_eq!(one.entries[0][0], z - 3.0);
        let long = transfer_matrix(&spec, z, 40, 0.0).unwrap();
        assert!(long.det_defect() <= 1e-10);
    }

    #[test]
    fn transfer_moves_solutions() {
        let spec = PotentialSpec::fibonacci(2.0, 0.3);
        let z = c(0.45);
        let v = generate(&spec, 100).unwrap().values;
        let (u0, u1) = (c(0.3), c(-1.1));
        let (mut prev, mut cur) = (u0, u1);
        for m in 1..=100 {
            let next = (z - v[m - 1]) * cur - prev;
            (prev, cur) = (cur, next);
            let phi = transfer_matrix(&spec, z, m, 0.3).unwrap();
            let out = phi.apply([u1, u0]);
            let scale = cur.norm().max(1.0);
            assert!((out[0] - cur).norm() <= 1e-9 * scale && (out[1] - prev).norm() <= 1e-9 * prev.norm().max(1.0));
        }
    }

    #[test]
    fn orbit_examples() {
        let o = trace_orbit(c(2.0), 0.0, 10).unwrap();
        for m in -1..=10 {
            assert_eq!(o.x(m).to_complex(), c(1.0));
        }
        let z = Complex64::new(1.3, -0.4);
        let o = trace_orbit(z, 5.0, 12).unwrap();
        assert_eq!(o.x(1).to_complex(), (z - 5.0) / 2.0);
        let x2 = z * (z - 5.0) / 2.0 - 1.0;
        assert!((o.x(2).to_complex() - x2).norm() < 1e-14);
        assert!((o.dx(2).to_complex() - (z - 2.5)).norm() < 1e-14);
        assert!(o.recursion_residuals().iter().all(|r| *r <= 1e-10));
        assert!(trace_orbit(z, 1.0, 1).is_err());
    }

    #[test]
    fn fricke_at_seeds_is_exact() {
        for (z, lambda) in [(c(0.0), 1.0), (c(3.25), 8.0), (c(-1.5), 0.5)] {
            let o = trace_orbit(z, lambda, 4).unwrap();
            assert_eq!(o.fricke_values()[0], c(lambda * lambda / 4.0));
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let (e, lambda, h) = (0.37, 2.0, 1e-6);
        let d = trace_orbit(c(e), lambda, 9).unwrap().dx(9).to_complex().re;
        let up = trace_orbit(c(e + h), lambda, 9).unwrap().x(9).to_complex().re;
        let dn = trace_orbit(c(e - h), lambda, 9).unwrap().x(9).to_complex().re;
        assert!(((up - dn) / (2.0 * h) - d).abs() <= 1e-5 * d.abs().max(1.0));
    }

    #[test]
    fn growth_past_double_range() {
        let o = trace_orbit(Complex64::new(0.0, 1.0), 8.0, 30).unwrap();
        assert!(o.x(30).ln_abs() > 1000.0);
        assert!(o.recursion_residuals().iter().all(|r| *r <= 1e-10));
    }

    #[test]
    fn fibonacci_numbers() {
        assert_eq!(fibonacci_number(1).unwrap(), 1);
        assert_eq!(fibonacci_number(2).unwrap(), 1);
        assert_eq!(fibonacci_number(10).unwrap(), 55);
        assert_eq!(fibonacci_number(90).unwrap(), 2_880_067_194_370_816_120);
        assert!(fibonacci_number(0).is_err());
        assert!(fibonacci_number(91).is_err());
        for l in 1..=30 {
            assert!(fibonacci_sandwich(l).unwrap());
            let binet = PHI.powi(l as i32) / 5f64.sqrt();
            let f = fibonacci_number(l).unwrap() as f64;
            assert!(binet - 0.5 <= f && f <= binet + 0.5);
        }
    }

    #[test]
    fn bounds() {
        let (lo, hi) = prop_close_bounds(12.0).unwrap();
        assert!((lo.unwrap() - 0.2514).abs() < 5e-5);
        assert!((hi.unwrap() - 0.4743).abs() < 1e-4);
        let (lo, hi) = prop_close_bounds(8.0).unwrap();
        assert!((lo.unwrap() - 2.0 * PHI.ln() / 38f64.ln()).abs() < 1e-15);
        assert!((hi.unwrap() - 2.0 * PHI.ln() / 3f64.ln()).abs() < 1e-12);
        let (lo, hi) = prop_close_bounds(24.0).unwrap();
        assert!((lo.unwrap() - 0.2266).abs() < 1e-4 && (hi.unwrap() - 0.3221).abs() < 1e-4);
        assert_eq!(prop_close_bounds(4.0).unwrap(), (None, None));
        assert!(prop_close_bounds(0.0).is_err());
    }
}
