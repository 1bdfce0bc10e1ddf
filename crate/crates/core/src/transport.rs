//! One-body transport: outside probabilities, position moments, Abel time
//! averages and finite-window estimators of the transport exponents.
//!
//! All estimators are fits over a finite time window, not the `limsup`
//! limits that define the exponents. To bias toward the `limsup`, fits are
//! taken on the running maximum of the logged quantity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{Cell, Csv};
use crate::fit::{fit_line, running_max};
use crate::onebody::{propagator_row, BoundaryPolicy, PropagatorRow, SpectralData};

/// Default fit window `[t_min, t_max]`.
pub const DEFAULT_WINDOW: (f64, f64) = (10.0, 300.0);
/// Default outside-probability thresholds for front-based estimates.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [1e-4, 1e-6, 1e-8];
/// Minimum number of sample times inside a fit window.
pub const MIN_WINDOW_SAMPLES: usize = 8;

/// `P(N,t) = Σ_{k>N} |F_{jk}(t)|²` for the row's source `j`.
pub fn outside_probability(row: &PropagatorRow, big_n: usize) -> Result<f64> {
    if big_n > row.n() {
        return Err(Error::domain(format!("N={big_n} exceeds chain length {}", row.n())));
    }
    Ok(row.amplitudes[big_n..].iter().map(|a| a.norm_sqr()).sum())
}

/// `|X|^p(t) = Σ_k k^p |F_{jk}(t)|²`.
pub fn moment(row: &PropagatorRow, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::domain(format!("moment order must be > 0, got {p}")));
    }
    Ok(moment_of_weights(&weights(row), p))
}

fn weights(row: &PropagatorRow) -> Vec<f64> {
    row.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

fn moment_of_weights(w: &[f64], p: f64) -> f64 {
    w.iter().enumerate().map(|(k, w)| ((k + 1) as f64).powf(p) * w).sum()
}

/// Result of an Abel average with its tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelAverage {
    pub value: f64,
    /// `e^{-2 t_max / T} · sup|f|`, the kernel mass beyond the last sample times the largest sample.
    pub truncation_bound: f64,
}

/// `⟨f⟩(T) = (2/T) ∫_0^∞ e^{-2t/T} f(t) dt` from samples `(t_i, f_i)`
/// starting at `t = 0`.
///
/// The kernel is integrated exactly against the piecewise-linear
/// interpolant of `f`, so constant and linear `f` carry no quadrature error.
pub fn abel_average(samples: &[(f64, f64)], big_t: f64) -> Result<AbelAverage> {
    if !(big_t > 0.0) {
        return Err(Error::domain("averaging time T must be > 0"));
    }
    if samples.len() < 2 {
        return Err(Error::domain("Abel average needs at least two samples"));
    }
    if samples[0].0 != 0.0 {
        return Err(Error::domain("samples must start at t = 0"));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::domain("sample times must be strictly increasing"));
    }
    let t_max = samples[samples.len() - 1].0;
    if t_max < 10.0 * big_t {
        return Err(Error::domain(format!(
            "insufficient tail: t_max={t_max} < 10·T={}",
            10.0 * big_t
        )));
    }
    let kappa = 2.0 / big_t;
    let mut value = 0.0;
    for w in samples.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        let h = b - a;
        let ea = (-kappa * a).exp();
        let eb = (-kappa * b).exp();
        let slope = (fb - fa) / h;
        value += fa * (ea - eb) + slope * ((ea - eb) / kappa - h * eb);
    }
    let sup = samples.iter().fold(0.0f64, |m, s| m.max(s.1.abs()));
    Ok(AbelAverage { value, truncation_bound: (-kappa * t_max).exp() * sup })
}

/// Finite-window exponent estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub method: String,
    /// Threshold whose front gave the estimate, for front-based fits.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
}

/// Probability rows from one source site over a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportSeries {
    pub times: Vec<f64>,
    /// `|F_{1k}(t)|²` per time, `k = 1..n`.
    pub weights: Vec<Vec<f64>>,
    pub boundary: BoundaryPolicy,
}

impl TransportSeries {
    /// Evolves `δ_1` over `times`, rejecting any time at which the boundary
    /// weight exceeds the policy tolerance. Times are evaluated in parallel
    /// and stored in input order.
    pub fn compute(spectral: &SpectralData, times: &[f64], boundary: BoundaryPolicy) -> Result<Self> {
        check_times(times)?;
        let weights = times
            .par_iter()
            .map(|&t| {
                let row = propagator_row(spectral, 1, t)?;
                boundary.check(&row)?;
                Ok(weights(&row))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TransportSeries { times: times.to_vec(), weights, boundary })
    }

    pub fn from_rows(rows: &[PropagatorRow], boundary: BoundaryPolicy) -> Result<Self> {
        let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
        check_times(&times)?;
        for r in rows {
            boundary.check(r)?;
        }
        Ok(TransportSeries { times, weights: rows.iter().map(weights).collect(), boundary })
    }

    pub fn n(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// `P(N, t_i)` for every sample time.
    pub fn outside_probabilities(&self, big_n: usize) -> Vec<f64> {
        self.weights.iter().map(|w| w[big_n.min(w.len())..].iter().sum()).collect()
    }

    /// `|X|^p(t_i)` for every sample time.
    pub fn moments(&self, p: f64) -> Vec<f64> {
        self.weights.iter().map(|w| moment_of_weights(w, p)).collect()
    }

    /// Long-format `(t, N, P)` rows.
    pub fn probability_table(&self, n_grid: &[usize]) -> Vec<(f64, usize, f64)> {
        let mut out = Vec::with_capacity(self.times.len() * n_grid.len());
        for (t, w) in self.times.iter().zip(&self.weights) {
            let tails = suffix_sums(w);
            for &big_n in n_grid {
                out.push((*t, big_n, tails[big_n.min(w.len())]));
            }
        }
        out
    }

    /// Long-format `(t, p, |X|^p)` rows.
    pub fn moment_table(&self, p_grid: &[f64]) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.times.len() * p_grid.len());
        for (t, w) in self.times.iter().zip(&self.weights) {
            for &p in p_grid {
                out.push((*t, p, moment_of_weights(w, p)));
            }
        }
        out
    }

    /// `t,N,P` long-format CSV.
    pub fn probability_csv(&self, n_grid: &[usize]) -> Csv {
        let mut csv = Csv::new(&["t", "N", "P"]);
        for (t, big_n, p) in self.probability_table(n_grid) {
            csv.row(&[Cell::F(t), Cell::U(big_n as u64), Cell::F(p)]);
        }
        csv
    }

    /// `t,p,moment` long-format CSV.
    pub fn moment_csv(&self, p_grid: &[f64]) -> Csv {
        let mut csv = Csv::new(&["t", "p", "moment"]);
        for (t, p, m) in self.moment_table(p_grid) {
            csv.row(&[Cell::F(t), Cell::F(p), Cell::F(m)]);
        }
        csv
    }

    fn window_indices(&self, window: (f64, f64)) -> Result<Vec<usize>> {
        let idx: Vec<usize> = (0..self.times.len())
            .filter(|&i| self.times[i] >= window.0 && self.times[i] <= window.1 && self.times[i] > 0.0)
            .collect();
        if idx.len() < MIN_WINDOW_SAMPLES {
            return Err(Error::domain(format!(
                "window [{}, {}] holds {} sample times, need {MIN_WINDOW_SAMPLES}",
                window.0,
                window.1,
                idx.len()
            )));
        }
        Ok(idx)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::domain("empty time grid"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::domain("times must be finite and >= 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("times must be strictly increasing"));
    }
    Ok(())
}

/// `tails[N] = Σ_{k>N} w_k` for `N = 0..=n`.
fn suffix_sums(w: &[f64]) -> Vec<f64> {
    let mut tails = vec![0.0; w.len() + 1];
    for k in (0..w.len()).rev() {
        tails[k] = tails[k + 1] + w[k];
    }
    tails
}

/// Least-squares slope of `log|X|^p` (or its Abel average) against `p·log t`.
///
/// With `averaged`, the window ranges over averaging times `T` and the
/// series must extend to `10·T` for each of them.
pub fn beta_estimator(
    series: &TransportSeries,
    p: f64,
    window: (f64, f64),
    averaged: bool,
) -> Result<ExponentFit> {
    if !(p > 0.0) {
        return Err(Error::domain("moment order must be > 0"));
    }
    let idx = series.window_indices(window)?;
    let moments = series.moments(p);
    let logs: Vec<f64> = if averaged {
        let samples: Vec<(f64, f64)> = series.times.iter().cloned().zip(moments.iter().cloned()).collect();
        series
            .times
            .iter()
            .take(idx[idx.len() - 1] + 1)
            .map(|&big_t| {
                if big_t <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                // times before the window only feed the running maximum
                if big_t < window.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(abel_average(&samples, big_t)?.value.ln())
            })
            .collect::<Result<_>>()?
    } else {
        moments.iter().map(|m| m.ln()).collect()
    };
    if idx.iter().any(|&i| !logs[i].is_finite()) {
        return Err(Error::numeric("non-finite moment in fit window"));
    }
    let envelope = running_max(&logs[..idx[idx.len() - 1] + 1]);
    let xs: Vec<f64> = idx.iter().map(|&i| p * series.times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| envelope[i]).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(ExponentFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
        window,
        method: if averaged {
            format!("running-max log<|X|^{p}>(T) vs p log T")
        } else {
            format!("running-max log|X|^{p}(t) vs p log t")
        },
        threshold: None,
    })
}

/// `r_ε(t) = min{N : P(N,t) ≤ ε}` at every sample time.
///
/// The front stands in for the outside probability `P(t^α - 1, t)`; the
/// `-1` shift there is ignored.
pub fn front_radius(series: &TransportSeries, epsilon: f64) -> Result<Vec<(f64, usize)>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("threshold must lie in (0,1), got {epsilon}")));
    }
    let n = series.n();
    let limit = n.saturating_sub(series.boundary.margin);
    series
        .times
        .iter()
        .zip(&series.weights)
        .map(|(&t, w)| {
            let tails = suffix_sums(w);
            let r = tails.iter().position(|&p| p <= epsilon).unwrap_or(n);
            if r > limit {
                return Err(Error::BoundaryReached(format!(
                    "front r={r} at t={t} within {} sites of the end of a chain of {n}",
                    series.boundary.margin
                )));
            }
            Ok((t, r))
        })
        .collect()
}

fn front_fit(series: &TransportSeries, epsilon: f64, window: (f64, f64)) -> Result<ExponentFit> {
    let idx = series.window_indices(window)?;
    let fronts = front_radius(series, epsilon)?;
    let logs: Vec<f64> = fronts.iter().map(|&(_, r)| (r.max(1) as f64).ln()).collect();
    let envelope = running_max(&logs);
    let xs: Vec<f64> = idx.iter().map(|&i| series.times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| envelope[i]).collect();
    let fit = fit_line(&xs, &ys)?;
    Ok(ExponentFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
        window,
        method: format!("running-max log r_eps(t) vs log t, eps={epsilon:e}"),
        threshold: Some(epsilon),
    })
}

/// Finite-window estimate of the upper transport exponent: the largest
/// front log-log slope over the thresholds. Not the `limsup` itself.
pub fn alpha_u_estimator(
    series: &TransportSeries,
    thresholds: &[f64],
    window: (f64, f64),
) -> Result<ExponentFit> {
    if thresholds.is_empty() {
        return Err(Error::domain("need at least one threshold"));
    }
    let fits = thresholds
        .iter()
        .map(|&eps| front_fit(series, eps, window))
        .collect::<Result<Vec<_>>>()?;
    let best = fits
        .into_iter()
        .max_by(|a, b| a.exponent.total_cmp(&b.exponent))
        .expect("nonempty");
    Ok(ExponentFit { method: format!("max over thresholds of front slopes; {}", best.method), ..best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onebody::{build_hamiltonian, eigensolve};
    use crate::potential::PotentialSpec;

    fn linear_grid(t_max: f64, count: usize) -> Vec<f64> {
        (0..count).map(|i| t_max * i as f64 / (count - 1) as f64).collect()
    }

    #[test]
    fn outside_probability_basics() {
        let s = eigensolve(&build_hamiltonian(&PotentialSpec::fibonacci(3.0, 0.2), 80).unwrap()).unwrap();
        let r0 = propagator_row(&s, 1, 0.0).unwrap();
        assert!(outside_probability(&r0, 3).unwrap() < 1e-25);
        let r = propagator_row(&s, 1, 2.5).unwrap();
        assert!((outside_probability(&r, 0).unwrap() - 1.0).abs() < 1e-10);
        let ps: Vec<f64> = (0..=80).map(|n| outside_probability(&r, n).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(ps.iter().all(|p| (-1e-15..=1.0 + 1e-12).contains(p)));
        assert!(outside_probability(&r, 81).is_err());
    }

    #[test]
    fn moment_basics() {
        let s = eigensolve(&build_hamiltonian(&PotentialSpec::fibonacci(3.0, 0.2), 60).unwrap()).unwrap();
        let r0 = propagator_row(&s, 1, 0.0).unwrap();
        assert!((moment(&r0, 2.0).unwrap() - 1.0).abs() < 1e-14);
        let r = propagator_row(&s, 1, 3.0).unwrap();
        assert!((moment(&r, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        let ps = [0.5, 1.0, 2.0, 3.5];
        let ms: Vec<f64> = ps.iter().map(|&p| moment(&r, p).unwrap()).collect();
        assert!(ms.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)));
        assert!(moment(&r, 0.0).is_err());
    }

    #[test]
    fn abel_closed_forms() {
        let big_t = 3.0;
        let grid = linear_grid(40.0, 4001);
        let c: Vec<(f64, f64)> = grid.iter().map(|&t| (t, 2.5)).collect();
        assert!((abel_average(&c, big_t).unwrap().value - 2.5).abs() < 1e-6);
        let ones: Vec<(f64, f64)> = grid.iter().map(|&t| (t, 1.0)).collect();
        assert!((abel_average(&ones, big_t).unwrap().value - 1.0).abs() < 1e-6);
        let lin: Vec<(f64, f64)> = grid.iter().map(|&t| (t, t)).collect();
        assert!((abel_average(&lin, big_t).unwrap().value - big_t / 2.0).abs() < 1e-4 * big_t);
        let grid1 = linear_grid(12.0, 6001);
        let ex: Vec<(f64, f64)> = grid1.iter().map(|&t| (t, (-t).exp())).collect();
        assert!((abel_average(&ex, 1.0).unwrap().value - 2.0 / 3.0).abs() < 1e-4);
        let short: Vec<(f64, f64)> = linear_grid(5.0, 50).iter().map(|&t| (t, 1.0)).collect();
        match abel_average(&short, 1.0) {
            Err(Error::Domain(msg)) => assert!(msg.contains("insufficient tail")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn localized_chain_has_small_beta() {
        let s = eigensolve(&build_hamiltonian(&PotentialSpec::iid_random(5.0, 0), 400).unwrap()).unwrap();
        let times: Vec<f64> = (0..=100).map(|i| 2.0 * i as f64).collect();
        let series = TransportSeries::compute(&s, &times, BoundaryPolicy::default()).unwrap();
        let fit = beta_estimator(&series, 2.0, (10.0, 200.0), false).unwrap();
        assert!(fit.exponent <= 0.1, "{fit:?}");
    }

    #[test]
    fn front_radius_edge_cases() {
        let s = eigensolve(&build_hamiltonian(&PotentialSpec::fibonacci(8.0, 0.0), 200).unwrap()).unwrap();
        let times = linear_grid(20.0, 21);
        let series = TransportSeries::compute(&s, &times, BoundaryPolicy::default()).unwrap();
        assert_eq!(front_radius(&series, 0.5).unwrap()[0], (0.0, 1));
        let loose = front_radius(&series, 1e-3).unwrap();
        let tight = front_radius(&series, 1e-8).unwrap();
        for (a, b) in loose.iter().zip(&tight) {
            assert!(b.1 >= a.1);
        }
        assert!(front_radius(&series, 1.0).is_err());
        assert!(front_radius(&series, 0.0).is_err());
    }

    #[test]
    fn single_threshold_alpha_equals_its_front_fit() {
        let s = eigensolve(&build_hamiltonian(&PotentialSpec::fibonacci(8.0, 0.0), 300).unwrap()).unwrap();
        let times: Vec<f64> = (0..40).map(|i| 10f64.powf(i as f64 / 39.0 * 2.0)).collect();
        let series = TransportSeries::compute(&s, &times, BoundaryPolicy::default()).unwrap();
        let single = alpha_u_estimator(&series, &[1e-6], (1.0, 100.0)).unwrap();
        let direct = front_fit(&series, 1e-6, (1.0, 100.0)).unwrap();
        assert_eq!(single.exponent, direct.exponent);
        assert_eq!(single.threshold, Some(1e-6));
        assert!(alpha_u_estimator(&series, &[], (1.0, 100.0)).is_err());
    }

    #[test]
    fn window_needs_enough_samples() {
        let s = eigensolve(&build_hamiltonian(&PotentialSpec::free(), 80).unwrap()).unwrap();
        let series = TransportSeries::compute(&s, &linear_grid(5.0, 11), BoundaryPolicy::default()).unwrap();
        assert!(beta_estimator(&series, 2.0, (4.0, 5.0), false).is_err());
    }
}
