//! Many-body commutator bounds built from one-body propagator rows, and
//! light-cone fits of the fronts they define.
//!
//! All bounds are stated with `‖B‖ = 1`. For a local `B` at `j′ > j`:
//! the exact lower bound `|F_{jj′}(t)|`, the fermionic envelope
//! `2 Σ_{k≥j′} |F_{jk}(t)|`, and the spin envelope
//! `4 Σ_{l≤j} Σ_{k≥j′} |F_{lk}(t)|`, which folds the `c_l*` terms into a
//! factor 2 because `H_n` is real symmetric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{fmt_f64, Cell, Csv};
use crate::fit::{fit_line, running_max};
use crate::onebody::{build_hamiltonian, eigensolve, propagator_row, PropagatorRow, SpectralData};
use crate::potential::PotentialSpec;
use crate::tracemap::AlphaPrimeEstimate;
use crate::transport::ExponentFit;

/// Sites kept between any front and the right end of the chain.
pub const FRONT_MARGIN: usize = 20;
/// Tolerance of [`consistency_report`].
pub const CONSISTENCY_TOLERANCE: f64 = 0.15;
/// Largest relative (log-scale) rms residual accepted by [`cone_fit`].
pub const MAX_RELATIVE_RESIDUAL: f64 = 0.2;
/// Number of profile snapshots kept for the decay-rate fit.
pub const PROFILE_SNAPSHOTS: usize = 5;
/// Profile values below this, per site of the chain, are rounding noise.
const PROFILE_FLOOR_PER_SITE: f64 = 1e-14;

fn find_row<'a>(rows: &'a [PropagatorRow], l: usize, t: f64) -> Result<&'a PropagatorRow> {
    rows.iter()
        .find(|r| r.j == l && r.t == t)
        .ok_or_else(|| Error::domain(format!("no propagator row for source {l} at t={t}")))
}

fn check_pair(n: usize, j: usize, jp: usize) -> Result<()> {
    if !(1 <= j && j < jp && jp <= n) {
        return Err(Error::domain(format!("need 1 <= j < j' <= n, got j={j}, j'={jp}, n={n}")));
    }
    Ok(())
}

fn suffix_abs(row: &PropagatorRow, jp: usize) -> f64 {
    row.amplitudes[jp - 1..].iter().map(|a| a.norm()).sum()
}

/// `2 Σ_{k≥j′} |F_{jk}(t)|`.
pub fn fermionic_envelope(rows: &[PropagatorRow], j: usize, jp: usize, t: f64) -> Result<f64> {
    let row = find_row(rows, j, t)?;
    check_pair(row.n(), j, jp)?;
    Ok(2.0 * suffix_abs(row, jp))
}

/// `4 Σ_{l=1}^{j} Σ_{k≥j′} |F_{lk}(t)|`.
pub fn spin_envelope(rows: &[PropagatorRow], j: usize, jp: usize, t: f64) -> Result<f64> {
    let n = find_row(rows, j, t)?.n();
    check_pair(n, j, jp)?;
    let mut total = 0.0;
    for l in 1..=j {
        total += suffix_abs(find_row(rows, l, t)?, jp);
    }
    Ok(4.0 * total)
}

/// The three `‖B‖`-normalised commutator surrogates for one `(t, j, j′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorBounds {
    pub t: f64,
    pub j: usize,
    pub j_prime: usize,
    pub lower: f64,
    pub fermi_envelope: f64,
    pub spin_envelope: f64,
}

impl CommutatorBounds {
    pub fn compute(spectral: &SpectralData, j: usize, jp: usize, t: f64) -> Result<Self> {
        check_pair(spectral.n(), j, jp)?;
        let rows = (1..=j).map(|l| propagator_row(spectral, l, t)).collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows, j, jp, t)
    }

    pub fn from_rows(rows: &[PropagatorRow], j: usize, jp: usize, t: f64) -> Result<Self> {
        let row = find_row(rows, j, t)?;
        check_pair(row.n(), j, jp)?;
        Ok(CommutatorBounds {
            t,
            j,
            j_prime: jp,
            lower: row.abs(jp),
            fermi_envelope: fermionic_envelope(rows, j, jp, t)?,
            spin_envelope: spin_envelope(rows, j, jp, t)?,
        })
    }

    pub fn is_ordered(&self, tol: f64) -> bool {
        self.lower <= self.fermi_envelope + tol && self.fermi_envelope <= self.spin_envelope + tol
    }
}

/// Which surrogate a cone scan thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Lower,
    Fermi,
    Spin,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Lower => "lower",
            Quantity::Fermi => "fermi",
            Quantity::Spin => "spin",
        }
    }

    /// `q(1, 1+d, t)` for `d = 1..n-1`, stored at index `d - 1`.
    pub fn profile(self, row: &PropagatorRow) -> Vec<f64> {
        let abs: Vec<f64> = row.amplitudes.iter().map(|a| a.norm()).collect();
        match self {
            Quantity::Lower => abs[1..].to_vec(),
            Quantity::Fermi | Quantity::Spin => {
                let factor = if self == Quantity::Fermi { 2.0 } else { 4.0 };
                let mut tail = vec![0.0; abs.len() - 1];
                let mut acc = 0.0;
                for k in (1..abs.len()).rev() {
                    acc += abs[k];
                    tail[k - 1] = factor * acc;
                }
                tail
            }
        }
    }
}

/// Smallest `d ≥ 1` with `q(d′) < ε` for every `d′ ≥ d`.
fn front_of(profile: &[f64], eps: f64) -> usize {
    match profile.iter().rposition(|&q| q >= eps) {
        Some(i) => i + 2,
        None => 1,
    }
}

/// `q(1, 1+d, t)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Fronts `d_ε(t)` from source site 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTable {
    pub lambda: f64,
    pub n: usize,
    pub quantity: Quantity,
    pub thresholds: Vec<f64>,
    pub times: Vec<f64>,
    /// `fronts[i][s]` for threshold `i` at time `s`.
    pub fronts: Vec<Vec<f64>>,
    pub profiles: Vec<ProfileSnapshot>,
}

impl FrontTable {
    /// `quantity,epsilon,t,front` rows.
    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["quantity", "epsilon", "t", "front"]);
        for (eps, fronts) in self.thresholds.iter().zip(&self.fronts) {
            for (t, d) in self.times.iter().zip(fronts) {
                csv.row(&[Cell::S(self.quantity.name()), Cell::F(*eps), Cell::F(*t), Cell::F(*d)]);
            }
        }
        csv
    }

    pub fn threshold_index(&self, eps: f64) -> Result<usize> {
        self.thresholds
            .iter()
            .position(|&e| e == eps)
            .ok_or_else(|| Error::domain(format!("threshold {eps} was not scanned")))
    }
}

fn snapshot_indices(times: &[f64], count: usize) -> Vec<usize> {
    let positive: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0.0).collect();
    if positive.len() <= count {
        return positive;
    }
    let mut idx: Vec<usize> = (0..count)
        .map(|s| positive[((positive.len() - 1) * (s + 1)) / count])
        .collect();
    idx.dedup();
    idx
}

/// Scans fronts of `quantity` over `times` for every threshold.
pub fn cone_scan(
    spec: &PotentialSpec,
    n: usize,
    times: &[f64],
    thresholds: &[f64],
    quantity: Quantity,
) -> Result<FrontTable> {
    let spectral = eigensolve(&build_hamiltonian(spec, n)?)?;
    cone_scan_with(&spectral, spec.lambda, times, thresholds, quantity)
}

/// [`cone_scan`] on a precomputed eigendecomposition.
pub fn cone_scan_with(
    spectral: &SpectralData,
    lambda: f64,
    times: &[f64],
    thresholds: &[f64],
    quantity: Quantity,
) -> Result<FrontTable> {
    let n = spectral.n();
    if n < FRONT_MARGIN + 3 {
        return Err(Error::domain(format!("chain of {n} sites is too short for a cone scan")));
    }
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times[0] < 0.0 {
        return Err(Error::domain("times must be nonnegative and strictly increasing"));
    }
    if thresholds.is_empty() || thresholds.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::domain("thresholds must be positive"));
    }
    let limit = n - 1 - FRONT_MARGIN;
    let snaps = snapshot_indices(times, PROFILE_SNAPSHOTS);
    let per_time = times
        .par_iter()
        .enumerate()
        .map(|(s, &t)| {
            let row = propagator_row(spectral, 1, t)?;
            let profile = quantity.profile(&row);
            let fronts: Vec<usize> = thresholds.iter().map(|&eps| front_of(&profile, eps)).collect();
            if let Some(&d) = fronts.iter().max().filter(|&&d| d > limit) {
                return Err(Error::BoundaryReached(format!(
                    "{} front d={d} at t={t} is within {FRONT_MARGIN} sites of the end of a chain of {n}",
                    quantity.name()
                )));
            }
            let snapshot = snaps.contains(&s).then(|| ProfileSnapshot { t, values: profile });
            Ok((fronts, snapshot))
        })
        .collect::<Result<Vec<_>>>()?;
    let fronts = (0..thresholds.len())
        .map(|i| per_time.iter().map(|(f, _)| f[i] as f64).collect())
        .collect();
    let profiles = per_time.into_iter().filter_map(|(_, p)| p).collect();
    Ok(FrontTable {
        lambda,
        n,
        quantity,
        thresholds: thresholds.to_vec(),
        times: times.to_vec(),
        fronts,
        profiles,
    })
}

/// Fitted light cone `d ≈ v t^α` with decay `e^{-μ(d - v t^α)}` outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeFit {
    pub lambda: f64,
    pub quantity: Quantity,
    pub threshold: f64,
    pub window: (f64, f64),
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub v: f64,
    /// Mean decay rate beyond the front over the profile snapshots.
    pub mu: Option<f64>,
    pub mu_samples: Vec<f64>,
    /// `log front - fitted log front` at each fitted time.
    pub residuals: Vec<f64>,
    /// Rms of `residuals`, i.e. the rms relative error of the fitted front.
    pub relative_residual: f64,
    /// The exponent is indistinguishable from 0: a localized, non-spreading front.
    pub localized: bool,
}

impl ConeFit {
    pub fn front(&self, t: f64) -> f64 {
        self.v * t.powf(self.alpha)
    }
}

/// Two-stage cone fit at one scanned threshold. The front is fitted on
/// its running maximum, as for the transport exponents.
pub fn cone_fit(table: &FrontTable, threshold: f64, window: (f64, f64)) -> Result<ConeFit> {
    let i = table.threshold_index(threshold)?;
    let envelope = running_max(&table.fronts[i]);
    let idx: Vec<usize> = (0..table.times.len())
        .filter(|&s| table.times[s] > 0.0 && table.times[s] >= window.0 && table.times[s] <= window.1)
        .collect();
    if idx.len() < 8 {
        return Err(Error::domain(format!("cone fit needs >= 8 front points in the window, got {}", idx.len())));
    }
    let xs: Vec<f64> = idx.iter().map(|&s| table.times[s].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&s| envelope[s].ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - fit.eval(*x)).collect();
    let relative_residual = fit.rms;
    if !(relative_residual <= MAX_RELATIVE_RESIDUAL) {
        return Err(Error::numeric(format!(
            "ill-conditioned cone fit: relative residual {relative_residual:.3} > {MAX_RELATIVE_RESIDUAL}"
        )));
    }
    let localized = fit.slope.abs() <= (3.0 * fit.slope_stderr).max(0.02);
    let v = fit.intercept.exp();
    let mu_samples: Vec<f64> = table
        .profiles
        .iter()
        .filter_map(|p| {
            let s = table.times.iter().position(|&t| t == p.t)?;
            decay_rate(&p.values, table.fronts[i][s] as usize)
        })
        .collect();
    let mu = (!mu_samples.is_empty()).then(|| mu_samples.iter().sum::<f64>() / mu_samples.len() as f64);
    Ok(ConeFit {
        lambda: table.lambda,
        quantity: table.quantity,
        threshold,
        window,
        alpha: fit.slope,
        alpha_stderr: fit.slope_stderr,
        v,
        mu,
        mu_samples,
        residuals,
        relative_residual,
        localized,
    })
}

/// `-d ln q / d d` beyond the front, over the stretch where `q` stays above
/// the rounding floor.
fn decay_rate(profile: &[f64], front: usize) -> Option<f64> {
    let floor = PROFILE_FLOOR_PER_SITE * (profile.len() + 1) as f64;
    let start = front.max(1) - 1;
    let pts: Vec<(f64, f64)> = profile[start..]
        .iter()
        .enumerate()
        .take_while(|(_, q)| **q > floor)
        .map(|(i, q)| (i as f64, q.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let rate = -fit_line(&xs, &ys).ok()?.slope;
    (rate > 0.0).then_some(rate)
}

/// Gnuplot data: `t front fit` per line, one block per threshold.
pub fn gnuplot_data(table: &FrontTable, fits: &[ConeFit]) -> String {
    let mut out = format!("# {} fronts, lambda={}, n={}\n", table.quantity.name(), fmt_f64(table.lambda), table.n);
    for (eps, fronts) in table.thresholds.iter().zip(&table.fronts) {
        out.push_str(&format!("# epsilon={}\n", fmt_f64(*eps)));
        let fit = fits.iter().find(|f| f.threshold == *eps);
        for (t, d) in table.times.iter().zip(fronts) {
            let model = fit.map_or(f64::NAN, |f| f.front(*t));
            out.push_str(&format!("{} {} {}\n", fmt_f64(*t), fmt_f64(*d), fmt_f64(model)));
        }
        out.push_str("\n\n");
    }
    out
}

/// Pairwise comparison of cone, transport and trace-map exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub lambda: f64,
    pub cones: Vec<(String, f64)>,
    pub transport_alpha: f64,
    pub alpha_prime: Option<f64>,
    pub differences: Vec<(String, f64)>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares every cone exponent with the front-based transport estimate
/// and with `α′`. For the free chain (`λ = 0`) the ballistic value 1
/// stands in for `α′`.
pub fn consistency_report(
    lambda: f64,
    cones: &[ConeFit],
    alpha_prime: Option<&AlphaPrimeEstimate>,
    transport: &ExponentFit,
) -> Result<ConsistencyReport> {
    if cones.is_empty() {
        return Err(Error::domain("consistency report needs at least one cone fit"));
    }
    if let Some(c) = cones.iter().find(|c| c.lambda != lambda) {
        return Err(Error::domain(format!("cone fit at lambda={} compared at lambda={lambda}", c.lambda)));
    }
    if let Some(a) = alpha_prime.filter(|a| a.lambda != lambda) {
        return Err(Error::domain(format!("alpha' at lambda={} compared at lambda={lambda}", a.lambda)));
    }
    let reference = match alpha_prime {
        Some(a) => Some(a.alpha_prime),
        None if lambda == 0.0 => Some(1.0),
        None => None,
    };
    let label = |c: &ConeFit| format!("cone_{}_eps{:e}", c.quantity.name(), c.threshold);
    let mut differences = Vec::new();
    for c in cones {
        differences.push((format!("{} - transport", label(c)), c.alpha - transport.exponent));
        if let Some(a) = reference {
            differences.push((format!("{} - alpha_prime", label(c)), c.alpha - a));
        }
    }
    if let Some(a) = reference {
        differences.push(("transport - alpha_prime".into(), transport.exponent - a));
    }
    let pass = differences.iter().all(|(_, d)| d.abs() <= CONSISTENCY_TOLERANCE);
    Ok(ConsistencyReport {
        lambda,
        cones: cones.iter().map(|c| (label(c), c.alpha)).collect(),
        transport_alpha: transport.exponent,
        alpha_prime: reference,
        differences,
        tolerance: CONSISTENCY_TOLERANCE,
        pass,
    })
}
