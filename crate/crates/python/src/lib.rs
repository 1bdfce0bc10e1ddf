//! Python module `pyfibxy`: a thin layer over the core crate.
//!
//! Structured results come back as plain dicts and lists.

use fibxy::dimerlab;
use fibxy::manybody::{cone_fit as core_cone_fit, cone_scan, Quantity};
use fibxy::onebody::{build_hamiltonian, eigensolve};
use fibxy::potential::PotentialSpec;
use fibxy::tracemap;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

fn py_err(e: fibxy::Error) -> PyErr {
    if e.is_numeric() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn spec(kind: &str, lambda: f64, omega: f64, seed: u64) -> PyResult<PotentialSpec> {
    let v = serde_json::json!({ "kind": kind, "lambda": lambda, "omega": omega, "seed": seed });
    serde_json::from_value(v).map_err(|e| PyValueError::new_err(format!("potential: {e}")))
}

/// Field values `v_1..v_n`.
#[pyfunction]
#[pyo3(signature = (n, kind = "fibonacci", lambda_ = 8.0, omega = 0.0, seed = 0))]
fn potential(n: usize, kind: &str, lambda_: f64, omega: f64, seed: u64) -> PyResult<Vec<f64>> {
    Ok(fibxy::potential::generate(&spec(kind, lambda_, omega, seed)?, n).map_err(py_err)?.values)
}

/// Row `j` of `exp(-2iHt)` for an `n`-site chain.
#[pyfunction]
#[pyo3(signature = (n, j, t, kind = "fibonacci", lambda_ = 8.0, omega = 0.0, seed = 0))]
fn propagator_row(n: usize, j: usize, t: f64, kind: &str, lambda_: f64, omega: f64, seed: u64) -> PyResult<Vec<Complex64>> {
    let s = eigensolve(&build_hamiltonian(&spec(kind, lambda_, omega, seed)?, n).map_err(py_err)?).map_err(py_err)?;
    Ok(fibxy::onebody::propagator_row(&s, j, t).map_err(py_err)?.amplitudes)
}

/// Light-cone fit `d(t) = v t^alpha` of the commutator front at `threshold`.
#[pyfunction]
#[pyo3(signature = (n, times, threshold = 1e-6, quantity = "spin", lambda_ = 8.0, omega = 0.0))]
fn cone_fit<'py>(
    py: Python<'py>,
    n: usize,
    times: Vec<f64>,
    threshold: f64,
    quantity: &str,
    lambda_: f64,
    omega: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let q: Quantity = serde_json::from_value(serde_json::Value::String(quantity.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown quantity {quantity:?}")))?;
    let (lo, hi) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(PyValueError::new_err("empty time grid")),
    };
    let s = spec("fibonacci", lambda_, omega, 0)?;
    let table = cone_scan(&s, n, &times, &[threshold], q).map_err(py_err)?;
    to_py(py, &core_cone_fit(&table, threshold, (lo, hi)).map_err(py_err)?)
}

/// Band-root estimate of the upper transport exponent.
#[pyfunction]
#[pyo3(signature = (lambda_, k_min = 8, k_max = 12))]
fn alpha_prime<'py>(py: Python<'py>, lambda_: f64, k_min: usize, k_max: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &tracemap::alpha_prime(lambda_, k_min, k_max).map_err(py_err)?)
}

#[pyfunction]
fn dimer_beta(p: f64) -> PyResult<f64> {
    dimerlab::dimer_beta(p).map_err(py_err)
}

#[pyfunction]
fn jw_degradation(p: f64) -> PyResult<f64> {
    dimerlab::jw_degradation(p).map_err(py_err)
}

/// Dense many-body check that `c_j(t)` is the one-body row, at most 12 sites.
#[pyfunction]
#[pyo3(signature = (n, j, t, lambda_ = 8.0, omega = 0.0))]
fn verify_free_fermion<'py>(py: Python<'py>, n: usize, j: usize, t: f64, lambda_: f64, omega: f64) -> PyResult<Bound<'py, PyAny>> {
    let s = spec("fibonacci", lambda_, omega, 0)?;
    to_py(py, &fibxy::oracle::verify_free_fermion(&s, n, j, t).map_err(py_err)?)
}

#[pymodule]
fn pyfibxy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(propagator_row, m)?)?;
    m.add_function(wrap_pyfunction!(cone_fit, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_prime, m)?)?;
    m.add_function(wrap_pyfunction!(dimer_beta, m)?)?;
    m.add_function(wrap_pyfunction!(jw_degradation, m)?)?;
    m.add_function(wrap_pyfunction!(verify_free_fermion, m)?)?;
    Ok(())
}
