//! One function per subcommand. Each writes into its own run directory.

use std::path::Path;

use fibxy::dimerlab::ensemble_transport;
use fibxy::export::{Cell, Csv};
use fibxy::manybody::{cone_fit, cone_scan_with, consistency_report, gnuplot_data, ConeFit};
use fibxy::onebody::{build_hamiltonian, eigensolve, propagator_row, BoundaryPolicy, SpectralData};
use fibxy::oracle::oracle_check;
use fibxy::potential::{generate, random_phases};
use fibxy::tracemap::{alpha_prime, band_roots, growth_rate_check, phase_independence_check, trace_orbit, AlphaPrimeEstimate};
use fibxy::transport::{alpha_u_estimator, beta_estimator, ExponentFit, TransportSeries};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{read_manifest, RunDir};
use crate::CliError;

fn spectral(cfg: &RunConfig) -> Result<SpectralData, CliError> {
    Ok(eigensolve(&build_hamiltonian(&cfg.potential, cfg.n)?)?)
}

fn need_fibonacci(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if !cfg.is_fibonacci() {
        return Err(CliError::config(format!("{command} needs potential.kind = \"fibonacci\"")));
    }
    Ok(())
}

pub fn potential(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let seq = generate(&cfg.potential, cfg.n)?;
    let mut csv = Csv::new(&["j", "v"]);
    for (j, v) in seq.values.iter().enumerate() {
        csv.row(&[Cell::U(j as u64 + 1), Cell::F(*v)]);
    }
    out.csv("potential.csv", &csv)
}

#[derive(Serialize)]
struct RowSummary {
    t: f64,
    norm_defect: f64,
    boundary_weight: f64,
}

pub fn evolve(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let s = spectral(cfg)?;
    let policy = BoundaryPolicy::default();
    let mut csv = Csv::new(&["t", "k", "re", "im", "abs2"]);
    let mut summary = Vec::new();
    for t in cfg.t_grid.expand() {
        let row = propagator_row(&s, 1, t)?;
        for (k, a) in row.amplitudes.iter().enumerate() {
            csv.row(&[Cell::F(t), Cell::U(k as u64 + 1), Cell::F(a.re), Cell::F(a.im), Cell::F(a.norm_sqr())]);
        }
        summary.push(RowSummary { t, norm_defect: (row.norm_sqr() - 1.0).abs(), boundary_weight: policy.tail_weight(&row) });
    }
    out.csv("evolve.csv", &csv)?;
    out.json("evolve_summary.json", "RowSummary[]", &summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportFits {
    pub lambda: f64,
    pub beta: Vec<ExponentFit>,
    pub beta_averaged: Vec<ExponentFit>,
    pub alpha_u: ExponentFit,
}

pub fn transport(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let s = spectral(cfg)?;
    let policy = BoundaryPolicy::default();
    let series = TransportSeries::compute(&s, &cfg.t_grid.expand(), policy)?;
    let n_grid: Vec<usize> = (0..).map(|i| 10usize << i).take_while(|&m| m < cfg.n).collect();
    out.csv("moments.csv", &series.moment_csv(&cfg.p_grid))?;
    out.csv("probabilities.csv", &series.probability_csv(&n_grid))?;
    let beta = cfg.p_grid.iter().map(|&p| beta_estimator(&series, p, cfg.fit_window, false)).collect::<Result<Vec<_>, _>>()?;
    let beta_averaged = if cfg.transport.averaged {
        let step = cfg.transport.averaged_step;
        let count = (10.0 * cfg.fit_window.1 / step).ceil() as usize;
        let times: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
        let long = TransportSeries::compute(&s, &times, policy)?;
        cfg.p_grid.iter().map(|&p| beta_estimator(&long, p, cfg.fit_window, true)).collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let alpha_u = alpha_u_estimator(&series, &cfg.thresholds, cfg.fit_window)?;
    out.json("transport_fits.json", "TransportFits", &TransportFits { lambda: cfg.potential.lambda, beta, beta_averaged, alpha_u })
}

pub fn tracemap(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    need_fibonacci(cfg, "tracemap")?;
    let lambda = cfg.potential.lambda;
    let tm = &cfg.tracemap;
    let orbit = trace_orbit(Complex64::new(tm.energy, tm.eps), lambda, tm.m_max)?;
    let fricke = orbit.fricke_defects();
    let mut csv = Csv::new(&["m", "re", "im", "log_abs", "fricke_defect"]);
    for m in -1..=orbit.m_max() as i64 {
        let x = orbit.x(m);
        let c = x.to_complex();
        let f = if m >= 0 && (m as usize) < fricke.len() { fricke[m as usize] } else { f64::NAN };
        csv.row(&[Cell::I(m), Cell::F(c.re), Cell::F(c.im), Cell::F(x.ln_abs()), Cell::F(f)]);
    }
    out.csv("orbit.csv", &csv)?;
    out.json("growth.json", "GrowthReport", &growth_rate_check(lambda, tm.energy, tm.eps, tm.m_max)?)?;
    let omegas = random_phases(cfg.seed, tm.phase_count);
    let phase = phase_independence_check(lambda, Complex64::new(tm.phase_z, 0.0), &omegas, tm.phase_m_max)?;
    out.json("phase.json", "PhaseReport", &phase)
}

pub fn alphaprime(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    need_fibonacci(cfg, "alphaprime")?;
    let ap = &cfg.alphaprime;
    let est = alpha_prime(cfg.potential.lambda, ap.k_min, ap.k_max)?;
    out.csv("alphaprime.csv", &est.to_csv())?;
    out.csv("band_roots.csv", &band_roots(cfg.potential.lambda, ap.k_max)?.to_csv())?;
    out.json("alphaprime.json", "AlphaPrimeEstimate", &est)
}

const GNUPLOT_SCRIPT: &str = "# gnuplot script for the cone data files\n\
set logscale xy\n\
set xlabel 't'\n\
set ylabel 'front distance'\n\
set key left top\n";

pub fn cone(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let s = spectral(cfg)?;
    let times = cfg.t_grid.expand();
    let mut fits: Vec<ConeFit> = Vec::new();
    let mut script = String::from(GNUPLOT_SCRIPT);
    let mut plots = Vec::new();
    for &q in &cfg.cone.quantities {
        let table = cone_scan_with(&s, cfg.potential.lambda, &times, &cfg.cone.thresholds, q)?;
        let these = cfg.cone.thresholds.iter().map(|&e| cone_fit(&table, e, cfg.fit_window)).collect::<Result<Vec<_>, _>>()?;
        out.csv(&format!("fronts_{}.csv", q.name()), &table.to_csv())?;
        let dat = format!("cone_{}.dat", q.name());
        let data = gnuplot_data(&table, &these);
        out.text(&dat, "gnuplot:t front fit", table.times.len() * table.thresholds.len(), &data)?;
        for (i, e) in table.thresholds.iter().enumerate() {
            plots.push(format!("'{dat}' index {i} using 1:2 with points title '{} eps={e}'", q.name()));
            plots.push(format!("'{dat}' index {i} using 1:3 with lines notitle"));
        }
        fits.extend(these);
    }
    script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    out.text("cone.gp", "gnuplot:script", 1, &script)?;
    out.json("cone_fits.json", "ConeFit[]", &fits)
}

#[derive(Serialize)]
struct OracleSummaryRow {
    n: usize,
    lambda: f64,
    omega: f64,
    max_defect: f64,
    max_magnitude_defect: f64,
    sandwich_violations: usize,
    pass: bool,
}

pub fn oracle(cfg: &RunConfig, out: &mut RunDir) -> Result<bool, CliError> {
    let report = oracle_check(&cfg.oracle)?;
    let mut csv = Csv::new(&["n", "lambda", "omega", "max_defect", "max_magnitude_defect", "sandwich_violations", "pass"]);
    for p in &report.points {
        let row = OracleSummaryRow {
            n: p.n,
            lambda: p.lambda,
            omega: p.omega,
            max_defect: p.max_defect,
            max_magnitude_defect: p.max_magnitude_defect,
            sandwich_violations: p.sandwich_violations.len(),
            pass: p.pass,
        };
        csv.row(&[
            Cell::U(row.n as u64),
            Cell::F(row.lambda),
            Cell::F(row.omega),
            Cell::F(row.max_defect),
            Cell::F(row.max_magnitude_defect),
            Cell::U(row.sandwich_violations as u64),
            Cell::S(if row.pass { "true" } else { "false" }),
        ]);
    }
    out.csv("oracle_summary.csv", &csv)?;
    out.json("oracle_report.json", "OracleReport", &report)?;
    Ok(report.pass)
}

pub fn dimer(cfg: &RunConfig, out: &mut RunDir) -> Result<(), CliError> {
    let d = &cfg.dimer;
    let report = ensemble_transport(d.n, &d.t_grid.expand(), &cfg.p_grid, d.ensemble_size, d.lambda, cfg.seed)?;
    out.csv("dimer.csv", &report.to_csv())?;
    out.json("dimer.json", "DimerReport", &report)
}

fn read_json<T: for<'de> Deserialize<'de>>(root: &Path, command: &str, file: &str) -> Result<Option<T>, CliError> {
    let dir = root.join(command);
    let Some(manifest) = read_manifest(&dir)? else { return Ok(None) };
    if !manifest.files.iter().any(|f| f.path == file) {
        return Ok(None);
    }
    let path = dir.join(file);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::config(format!("unreadable {}: {e}", path.display())))
}

/// Consistency of prior `cone`, `transport` and `alphaprime` outputs under
/// the same output root.
pub fn report(cfg: &RunConfig, root: &Path, out: &mut RunDir) -> Result<bool, CliError> {
    let fits: Vec<ConeFit> = read_json(root, "cone", "cone_fits.json")?
        .ok_or_else(|| CliError::config("report needs a prior `cone` run in the output directory"))?;
    let transport: TransportFits = read_json(root, "transport", "transport_fits.json")?
        .ok_or_else(|| CliError::config("report needs a prior `transport` run in the output directory"))?;
    let ap: Option<AlphaPrimeEstimate> = read_json(root, "alphaprime", "alphaprime.json")?;
    if ap.is_none() && cfg.potential.lambda != 0.0 {
        return Err(CliError::config("report needs a prior `alphaprime` run for lambda > 0"));
    }
    let chosen: Vec<ConeFit> = fits.into_iter().filter(|f| f.threshold == cfg.cone.report_threshold).collect();
    if chosen.is_empty() {
        return Err(CliError::config(format!("no cone fits at cone.report_threshold = {}", cfg.cone.report_threshold)));
    }
    let r = consistency_report(cfg.potential.lambda, &chosen, ap.as_ref(), &transport.alpha_u)?;
    let mut csv = Csv::new(&["comparison", "difference"]);
    for (label, d) in &r.differences {
        csv.row(&[Cell::S(label), Cell::F(*d)]);
    }
    out.csv("report.csv", &csv)?;
    out.json("report.json", "ConsistencyReport", &r)?;
    Ok(r.pass)
}
