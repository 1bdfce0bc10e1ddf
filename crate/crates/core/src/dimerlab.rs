//! Random-dimer comparison: closed-form exponent curves, the
//! Jordan-Wigner degradation exponent, and ensemble transport runs.
//!
//! For the random dimer model `β⁺(p) = max{0, 1 - 1/(2p)}`. Summing
//! power-law fermionic commutators over the Jordan-Wigner string turns the
//! one-body exponent into `pβ⁺(p)/(p - 1) = (p - 1/2)/(p - 1) > 1`, so no
//! power-law many-body bound with exponent below 1 follows. Whether the
//! extra `1/p` in the fermionic bound is essential is open.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{Cell, Csv};
use crate::fit::{fit_line, running_max};
use crate::onebody::{build_hamiltonian, eigensolve, BoundaryPolicy};
use crate::potential::{keyed_u64, PotentialSpec, STREAM_ENSEMBLE};
use crate::transport::TransportSeries;

pub const MIN_ENSEMBLE: usize = 8;
/// Coupling of the Fibonacci control run.
pub const FIBONACCI_CONTROL_LAMBDA: f64 = 8.0;

/// `β⁺(p) = max{0, 1 - 1/(2p)}`, evaluated as `(2p - 1)/(2p)`.
pub fn dimer_beta(p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("moment order must be > 0, got {p}")));
    }
    Ok(((2.0 * p - 1.0) / (2.0 * p)).max(0.0))
}

/// `(p - 1/2)/(p - 1)`, the exponent left after summing over the string.
pub fn jw_degradation(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::domain("moment order must be finite"));
    }
    if p <= 1.0 {
        return Err(Error::domain(format!("sum diverges for p <= 1 (p = {p})")));
    }
    Ok((p - 0.5) / (p - 1.0))
}

/// Ensemble exponent for one field family and moment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub family: String,
    pub p: f64,
    /// Slope of the ensemble-averaged `log⟨|X|^p⟩` against `p log t`.
    pub estimate: f64,
    /// Standard error of the mean of the per-realization slopes.
    pub stderr: f64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimerReport {
    pub lambda: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub window: (f64, f64),
    pub p_grid: Vec<f64>,
    pub formula: Vec<f64>,
    /// `None` where `p ≤ 1`.
    pub degradation: Vec<Option<f64>>,
    pub estimates: Vec<EnsembleEstimate>,
    pub ensemble_size: usize,
    pub seed: u64,
    pub realization_seeds: Vec<u64>,
}

impl DimerReport {
    pub fn estimate(&self, family: &str, p: f64) -> Option<&EnsembleEstimate> {
        self.estimates.iter().find(|e| e.family == family && e.p == p)
    }

    /// `p,formula,degradation,family,estimate,stderr`; one row per family
    /// and `p`, degradation empty for `p ≤ 1`.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["p", "formula", "degradation", "family", "estimate", "stderr"]);
        for e in &self.estimates {
            let i = self.p_grid.iter().position(|&p| p == e.p).unwrap_or(0);
            let deg = match self.degradation[i] {
                Some(d) => Cell::F(d),
                None => Cell::S(""),
            };
            csv.row(&[Cell::F(e.p), Cell::F(self.formula[i]), deg, Cell::S(&e.family), Cell::F(e.estimate), Cell::F(e.stderr)]);
        }
        csv
    }
}

/// Running-max log-log slope of a moment curve over `window`.
fn moment_slope(times: &[f64], moments: &[f64], p: f64, window: (f64, f64)) -> Result<f64> {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0.0 && times[i] >= window.0 && times[i] <= window.1).collect();
    if idx.len() < 3 {
        return Err(Error::domain("fit window holds fewer than 3 times"));
    }
    let last = idx[idx.len() - 1];
    let logs: Vec<f64> = moments[..=last].iter().map(|m| m.ln()).collect();
    let envelope = running_max(&logs);
    let xs: Vec<f64> = idx.iter().map(|&i| p * times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| envelope[i]).collect();
    Ok(fit_line(&xs, &ys)?.slope)
}

fn moment_table(spec: &PotentialSpec, n: usize, times: &[f64], p_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let spectral = eigensolve(&build_hamiltonian(spec, n)?)?;
    let series = TransportSeries::compute(&spectral, times, BoundaryPolicy::default())?;
    Ok(p_grid.iter().map(|&p| series.moments(p)).collect())
}

fn estimate_family(
    family: &str,
    specs: &[PotentialSpec],
    n: usize,
    times: &[f64],
    p_grid: &[f64],
    window: (f64, f64),
) -> Result<Vec<EnsembleEstimate>> {
    let tables = specs
        .par_iter()
        .map(|s| moment_table(s, n, times, p_grid))
        .collect::<Result<Vec<_>>>()?;
    let r = tables.len() as f64;
    p_grid
        .iter()
        .enumerate()
        .map(|(ip, &p)| {
            let mean: Vec<f64> = (0..times.len()).map(|s| tables.iter().map(|tab| tab[ip][s]).sum::<f64>() / r).collect();
            let estimate = moment_slope(times, &mean, p, window)?;
            let slopes = tables.iter().map(|tab| moment_slope(times, &tab[ip], p, window)).collect::<Result<Vec<_>>>()?;
            let stderr = if slopes.len() > 1 {
                let m = slopes.iter().sum::<f64>() / r;
                (slopes.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
            } else {
                0.0
            };
            Ok(EnsembleEstimate { family: family.to_string(), p, estimate, stderr, realizations: tables.len() })
        })
        .collect()
}

/// Ensemble-averaged moment exponents for random dimer and unpaired i.i.d.
/// `±λ` fields, with free and Fibonacci (`λ = 8`) single-run controls.
/// Realization `r` uses the seed drawn from `(seed, r)`, so the report does
/// not depend on scheduling.
pub fn ensemble_transport(
    n: usize,
    times: &[f64],
    p_list: &[f64],
    ensemble_size: usize,
    lambda: f64,
    seed: u64,
) -> Result<DimerReport> {
    if !(lambda >= 0.0 && lambda < 1.0) {
        return Err(Error::domain(format!("dimer coupling must lie in [0, 1), got {lambda}")));
    }
    if ensemble_size < MIN_ENSEMBLE {
        return Err(Error::domain(format!("ensemble needs >= {MIN_ENSEMBLE} realizations, got {ensemble_size}")));
    }
    if p_list.is_empty() {
        return Err(Error::domain("empty moment-order grid"));
    }
    let t_max = times.last().copied().unwrap_or(0.0);
    let window = ((t_max / 15.0).max(times.iter().copied().find(|&t| t > 0.0).unwrap_or(1.0)), t_max);
    let formula = p_list.iter().map(|&p| dimer_beta(p)).collect::<Result<Vec<_>>>()?;
    let degradation = p_list.iter().map(|&p| jw_degradation(p).ok()).collect();
    let realization_seeds: Vec<u64> = (0..ensemble_size as u64).map(|r| keyed_u64(seed, STREAM_ENSEMBLE, r)).collect();
    let dimers: Vec<PotentialSpec> = realization_seeds.iter().map(|&s| PotentialSpec::random_dimer(lambda, s)).collect();
    let iids: Vec<PotentialSpec> = realization_seeds.iter().map(|&s| PotentialSpec::iid_random(lambda, s)).collect();
    let mut estimates = estimate_family("random_dimer", &dimers, n, times, p_list, window)?;
    estimates.extend(estimate_family("iid_random", &iids, n, times, p_list, window)?);
    estimates.extend(estimate_family("free", &[PotentialSpec::free()], n, times, p_list, window)?);
    estimates.extend(estimate_family(
        "fibonacci",
        &[PotentialSpec::fibonacci(FIBONACCI_CONTROL_LAMBDA, 0.0)],
        n,
        times,
        p_list,
        window,
    )?);
    Ok(DimerReport {
        lambda,
        n,
        times: times.to_vec(),
        window,
        p_grid: p_list.to_vec(),
        formula,
        degradation,
        estimates,
        ensemble_size,
        seed,
        realization_seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_values() {
        assert_eq!(dimer_beta(0.5).unwrap(), 0.0);
        assert_eq!(dimer_beta(0.25).unwrap(), 0.0);
        assert_eq!(dimer_beta(1.0).unwrap(), 0.5);
        assert_eq!(dimer_beta(10.0).unwrap(), 0.95);
        assert!(dimer_beta(0.0).is_err() && dimer_beta(f64::NAN).is_err());
        assert_eq!(jw_degradation(2.0).unwrap(), 1.5);
        assert_eq!(jw_degradation(101.0).unwrap(), 100.5 / 100.0);
        assert!(jw_degradation(1.0).is_err() && jw_degradation(0.5).is_err());
    }

    #[test]
    fn rejects_bad_ensembles() {
        let times = [0.0, 1.0, 2.0];
        assert!(ensemble_transport(50, &times, &[2.0], 16, 1.0, 0).is_err());
        assert!(ensemble_transport(50, &times, &[2.0], 4, 0.5, 0).is_err());
    }
}
