//! Empirical checks on trace-map orbits: exponential growth off the real
//! axis and phase independence of the half-traces.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fibonacci_number, trace_orbit, transfer_product};
use crate::error::{Error, Result};
use crate::potential::{generate, PotentialSpec};

/// Smallest growth rate reported by [`growth_rate_check`].
pub const MIN_DELTA: f64 = 1e-3;

/// Result of fitting `|x_M(E+iε)| ≥ (1+δ)^{G_{M-M_0}}`, `G_j = F_{j+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub lambda: f64,
    pub energy: f64,
    pub eps: f64,
    pub m_max: usize,
    /// `ln|x_M|` for `M = -1..=M_max`.
    pub log_abs_x: Vec<f64>,
    pub delta_hat: Option<f64>,
    pub m0_hat: Option<usize>,
    pub message: String,
}

impl GrowthReport {
    pub fn found(&self) -> bool {
        self.delta_hat.is_some()
    }
}

/// Finds the smallest `M_0` for which some `δ ≥ 10⁻³` satisfies
/// `|x_M| ≥ (1+δ)^{G_{M-M_0}}` for every `M_0 < M ≤ M_max`, and the largest
/// such `δ`. Here `G_j = F_{j+1}` is the site count behind `x_j`.
pub fn growth_rate_check(lambda: f64, energy: f64, eps: f64, m_max: usize) -> Result<GrowthReport> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite() && energy.is_finite()) {
        return Err(Error::domain("coupling and energy must be finite, coupling >= 0"));
    }
    if m_max + 1 > super::FIB_MAX_INDEX as usize {
        return Err(Error::domain("M_max too large for the Fibonacci table"));
    }
    let orbit = trace_orbit(Complex64::new(energy, eps), lambda, m_max.max(2))?;
    let log_abs_x: Vec<f64> = (-1..=m_max as i64).map(|m| orbit.x(m).ln_abs()).collect();
    let ln_x = |m: usize| log_abs_x[m + 1];
    let mut best = None;
    for m0 in 0..m_max {
        let mut rate = f64::INFINITY;
        for m in m0 + 1..=m_max {
            let g = fibonacci_number((m - m0) as u32 + 1)? as f64;
            rate = rate.min(ln_x(m) / g);
        }
        let delta = rate.exp_m1();
        if delta >= MIN_DELTA {
            best = Some((m0, delta));
            break;
        }
    }
    let message = match best {
        Some((m0, d)) => format!("growth (1+{d:.4})^G from M0={m0}"),
        None => format!("no M0 < {m_max} with delta >= {MIN_DELTA}"),
    };
    Ok(GrowthReport {
        lambda,
        energy,
        eps,
        m_max,
        log_abs_x,
        delta_hat: best.map(|b| b.1),
        m0_hat: best.map(|b| b.0),
        message,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
    Both,
}

/// Phase comparison at one `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub omega: f64,
    /// `|x_M(z,ω) - x_M(z,0)| / max(1, |x_M(z,0)|)` for `M = 1..=M_max`.
    pub defects: Vec<f64>,
    pub odd_pass: bool,
    pub even_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub lambda: f64,
    pub z: Complex64,
    pub m_max: usize,
    pub tolerance: f64,
    pub rows: Vec<PhaseRow>,
    /// Parity class passing at every `ω` of the grid, if any.
    pub grid_class: Option<Parity>,
}

impl PhaseReport {
    /// Number of parity classes (0, 1 or 2) that pass on the whole grid.
    pub fn grid_class_count(&self) -> usize {
        match self.grid_class {
            None => 0,
            Some(Parity::Both) => 2,
            Some(_) => 1,
        }
    }
}

pub const PHASE_TOLERANCE: f64 = 1e-9;

fn half_trace(lambda: f64, omega: f64, z: Complex64, m: usize) -> Result<Complex64> {
    let sites = fibonacci_number(m as u32 + 1)? as usize;
    let values = generate(&PotentialSpec::fibonacci(lambda, omega), sites)?.values;
    Ok(transfer_product(&values, z).half_trace())
}

/// Compares `x_M(z,ω)`, the half-trace over the first `F_{M+1}` sites at
/// phase `ω`, with `x_M(z,0)` for `M = 1..=M_max`.
///
/// At each `ω` at least one parity class of `M` must agree; a phase where
/// neither does is a numeric failure.
pub fn phase_independence_check(
    lambda: f64,
    z: Complex64,
    omega_grid: &[f64],
    m_max: usize,
) -> Result<PhaseReport> {
    if omega_grid.is_empty() {
        return Err(Error::domain("empty phase grid"));
    }
    if m_max == 0 || m_max > 25 {
        return Err(Error::domain("M_max must lie in 1..=25"));
    }
    let reference = (1..=m_max).map(|m| half_trace(lambda, 0.0, z, m)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(omega_grid.len());
    for &omega in omega_grid {
        let defects = (1..=m_max)
            .map(|m| {
                let x = half_trace(lambda, omega, z, m)?;
                let x0 = reference[m - 1];
                Ok((x - x0).norm() / x0.norm().max(1.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        let class_passes = |parity: usize| {
            defects.iter().enumerate().filter(|(i, _)| (i + 1) % 2 == parity).all(|(_, d)| *d <= PHASE_TOLERANCE)
        };
        let row = PhaseRow { omega, odd_pass: class_passes(1), even_pass: class_passes(0), defects };
        if !row.odd_pass && !row.even_pass {
            return Err(Error::numeric(format!(
                "at omega={omega} neither parity class of x_M matches omega=0 (convention audit)"
            )));
        }
        rows.push(row);
    }
    let odd = rows.iter().all(|r| r.odd_pass);
    let even = rows.iter().all(|r| r.even_pass);
    let grid_class = match (odd, even) {
        (true, true) => Some(Parity::Both),
        (true, false) => Some(Parity::Odd),
        (false, true) => Some(Parity::Even),
        (false, false) => None,
    };
    Ok(PhaseReport { lambda, z, m_max, tolerance: PHASE_TOLERANCE, rows, grid_class })
}
