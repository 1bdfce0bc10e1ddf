//! Contour-integral evaluation of propagator matrix elements, used only to
//! cross-check the spectral route.
//!
//! The kernel is `e^{+itz}`: the residue of `(μ - z)^{-1}` at an eigenvalue
//! `μ = -2E` of `-2H_n` then reproduces `e^{-2iEt}`. With `e^{-itz}` the same
//! integral yields the complex conjugate `(e^{+2iH_n t})_{jk}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{eigensolve, propagator_row, solve_shifted, TridiagonalOperator};
use crate::error::{Error, Result};

/// Axis-aligned rectangle `[re_min, re_max] × [-im_half, im_half]`,
/// traversed counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_half: f64,
}

impl Rectangle {
    /// `[-K, K] × [-1, 1]`, enclosing `[-K+1, K-1]` with unit clearance.
    pub fn around_bound(k: f64) -> Self {
        Rectangle { re_min: -k, re_max: k, im_half: 1.0 }
    }

    fn encloses(&self, lo: f64, hi: f64) -> bool {
        self.re_min < lo && self.re_max > hi && self.im_half > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DunfordCheck {
    pub contour: Complex64,
    pub spectral: Complex64,
    pub difference: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = n * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

const PANEL_ORDER: usize = 16;

/// `-(1/2πi) ∮ e^{i t z} R_{jk}(z) dz` over `contour`, with `R(z) = (-2T - z)^{-1}`.
pub(crate) fn contour_element(
    op: &TridiagonalOperator,
    j: usize,
    k: usize,
    t: f64,
    contour: &Rectangle,
    quad_points: usize,
) -> Result<Complex64> {
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let width = contour.re_max - contour.re_min;
    let height = 2.0 * contour.im_half;
    let perimeter = 2.0 * (width + height);
    let y = contour.im_half;
    let corners = [
        Complex64::new(contour.re_min, -y),
        Complex64::new(contour.re_max, -y),
        Complex64::new(contour.re_max, y),
        Complex64::new(contour.re_min, y),
    ];
    let mut total = Complex64::new(0.0, 0.0);
    for side in 0..4 {
        let a = corners[side];
        let b = corners[(side + 1) % 4];
        let len = (b - a).norm();
        let points = ((quad_points as f64) * len / perimeter).ceil() as usize;
        let panels = points.div_ceil(PANEL_ORDER).max(1);
        let step = (b - a) / panels as f64;
        for p in 0..panels {
            let start = a + step * p as f64;
            for (x, w) in gx.iter().zip(&gw) {
                let z = start + step * (0.5 * (x + 1.0));
                let col = solve_shifted(op, z, k - 1)?;
                let f = (Complex64::i() * t * z).exp() * col[j - 1];
                total += f * step * (0.5 * w);
            }
        }
    }
    Ok(-total / (2.0 * PI * Complex64::i()))
}

/// Compares the contour integral with the spectral evaluation of `F_{jk}(t)`.
pub fn dunford_check(
    op: &TridiagonalOperator,
    j: usize,
    k: usize,
    t: f64,
    contour: &Rectangle,
    quad_points: usize,
) -> Result<DunfordCheck> {
    let n = op.n();
    if j == 0 || k == 0 || j > n || k > n {
        return Err(Error::domain("site index outside the chain"));
    }
    if !(t >= 0.0) {
        return Err(Error::domain("time must be >= 0"));
    }
    let spectral_data = eigensolve(op)?;
    let lo = -2.0 * spectral_data.eigenvalues[n - 1];
    let hi = -2.0 * spectral_data.eigenvalues[0];
    if !contour.encloses(lo, hi) {
        return Err(Error::domain(format!(
            "contour {contour:?} does not strictly enclose the spectrum [{lo}, {hi}]"
        )));
    }
    let contour_value = contour_element(op, j, k, t, contour, quad_points)?;
    let spectral = propagator_row(&spectral_data, j, t)?.amplitudes[k - 1];
    Ok(DunfordCheck {
        contour: contour_value,
        spectral,
        difference: (contour_value - spectral).norm(),
    })
}
