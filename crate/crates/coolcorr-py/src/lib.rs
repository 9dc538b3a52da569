//! Python bindings for `coolcorr`.
//!
//! Energies are passed as lists of floats, inverse temperatures as floats
//! (`float("inf")` for zero temperature). Request errors raise `ValueError`,
//! internal consistency failures raise `RuntimeError`.

use std::collections::BTreeMap;

use coolcorr::cli::config::{ExperimentConfig, Scenario};
use coolcorr::cli::output::Cell;
use coolcorr::correlations::{self, OracleOptions, StuApproach};
use coolcorr::spectra::{Hamiltonian, InverseTemperature};
use coolcorr::{coherent, spectra, CoolError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: CoolError) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn hamiltonian(energies: Vec<f64>) -> PyResult<Hamiltonian> {
    Hamiltonian::new(energies).map_err(to_py)
}

fn inverse_temperature(beta: f64) -> PyResult<InverseTemperature> {
    InverseTemperature::new(beta).map_err(to_py)
}

/// Thermal populations of `energies` at inverse temperature `beta`.
#[pyfunction]
fn gibbs_populations(energies: Vec<f64>, beta: f64) -> PyResult<Vec<f64>> {
    Ok(spectra::gibbs_populations(&hamiltonian(energies)?, inverse_temperature(beta)?).into_vec())
}

/// Coldest populations reachable with a machine of largest gap `e_max`.
#[pyfunction]
fn universal_bound_state(d: usize, e_max: f64, beta: f64) -> PyResult<Vec<f64>> {
    let b = coherent::universal_bound_state(d, e_max, inverse_temperature(beta)?).map_err(to_py)?;
    Ok(b.populations.into_vec())
}

/// Minimal work to bring a qubit to ground population `r_target` with a
/// one-qubit machine.
#[pyfunction]
fn one_qubit_work(system_gap: f64, machine_gap: f64, beta: f64, r_target: f64) -> PyResult<f64> {
    let s = coherent::one_qubit_optimal(system_gap, machine_gap, inverse_temperature(beta)?, r_target)
        .map_err(to_py)?;
    Ok(s.delta_f)
}

/// Minimal work from the linear program over doubly stochastic maps.
#[pyfunction]
fn min_work(system: Vec<f64>, machine: Vec<f64>, beta: f64, r_target: f64) -> PyResult<f64> {
    let spec = coherent::MachineSpec::new(hamiltonian(machine)?, inverse_temperature(beta)?);
    coherent::min_work_lp(&hamiltonian(system)?, &spec, r_target).map_err(to_py)
}

/// Entropy ceiling `S_A + S_B` at total energy `c`, with its temperature.
#[pyfunction]
fn jaynes_bound<'py>(py: Python<'py>, h_a: Vec<f64>, h_b: Vec<f64>, beta_r: f64, c: f64) -> PyResult<Bound<'py, PyDict>> {
    let j = correlations::jaynes_bound(&hamiltonian(h_a)?, &hamiltonian(h_b)?, inverse_temperature(beta_r)?, c)
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("beta", j.beta.beta())?;
    d.set_item("bound", j.bound)?;
    d.set_item("energy_residual", j.energy_residual)?;
    d.set_item("saturated", j.saturated)?;
    d.set_item("below_initial", j.below_initial)?;
    Ok(d)
}

/// Optimal mutual information from the joint ground state at energy `c`.
#[pyfunction]
fn pure_state_optimum<'py>(py: Python<'py>, h_a: Vec<f64>, h_b: Vec<f64>, c: f64) -> PyResult<Bound<'py, PyDict>> {
    let o = correlations::pure_state_optimum(&hamiltonian(h_a)?, &hamiltonian(h_b)?, c).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("beta", o.beta.beta())?;
    d.set_item("info", o.info)?;
    d.set_item("energy_residual", o.energy_residual)?;
    d.set_item("marginal_a", o.marginal_a.into_vec())?;
    d.set_item("marginal_b", o.marginal_b.into_vec())?;
    Ok(d)
}

/// Builds a symmetrically thermalizing unitary and evaluates its output.
#[pyfunction]
#[pyo3(signature = (energies, beta_r, beta_prime, approach = "geometric"))]
fn symmetric_thermalization<'py>(
    py: Python<'py>,
    energies: Vec<f64>,
    beta_r: f64,
    beta_prime: f64,
    approach: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let h = hamiltonian(energies)?;
    let (br, bp) = (inverse_temperature(beta_r)?, inverse_temperature(beta_prime)?);
    let approach: StuApproach = approach.parse().map_err(to_py)?;
    let (cert, rerouted) = correlations::construct_stu(&h, br, bp, approach).map_err(to_py)?;
    let u = correlations::build_stu_unitary(&cert, &correlations::latin_blocks(&h, br)).map_err(to_py)?;
    let ev = correlations::evaluate_stu(&h, br, bp, &u).map_err(to_py)?;
    let matrices: Vec<Vec<Vec<f64>>> = cert
        .matrices
        .iter()
        .map(|m| {
            let m = m.matrix();
            (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
        })
        .collect();
    let d = PyDict::new(py);
    d.set_item("approach", cert.approach.name())?;
    d.set_item("rerouted", rerouted)?;
    d.set_item("residual", cert.residual)?;
    d.set_item("weights", cert.weights)?;
    d.set_item("matrices", matrices)?;
    d.set_item("marginal_a", ev.marginal_a)?;
    d.set_item("marginal_b", ev.marginal_b)?;
    d.set_item("marginal_error", ev.marginal_error)?;
    d.set_item("mutual_information", ev.mutual_information)?;
    d.set_item("expected_information", correlations::expected_information(&h, br, bp))?;
    d.set_item("energy", ev.energy)?;
    Ok(d)
}

/// Sampled maximum of the mutual information at energy budget `c`.
#[pyfunction]
#[pyo3(signature = (h_a, h_b, beta_r, c, samples = 1000, seed = 0, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn oracle<'py>(
    py: Python<'py>,
    h_a: Vec<f64>,
    h_b: Vec<f64>,
    beta_r: f64,
    c: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let (ha, hb, br) = (hamiltonian(h_a)?, hamiltonian(h_b)?, inverse_temperature(beta_r)?);
    let opts = OracleOptions { workers: workers.max(1), ..OracleOptions::new(samples, seed) };
    let r = py
        .detach(|| correlations::brute_force_max_correlations_with(&ha, &hb, br, c, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("best_info", r.best_info)?;
    d.set_item("best_energy", r.best_energy)?;
    d.set_item("initial_energy", r.initial_energy)?;
    d.set_item("feasible", r.feasible)?;
    Ok(d)
}

/// Runs a subcommand on config text; returns the config hash and the table
/// as a dict of columns.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, scenario: &str, text: &str) -> PyResult<(String, Bound<'py, PyDict>)> {
    let scenario: Scenario = scenario.parse().map_err(to_py)?;
    let cfg = ExperimentConfig::from_text(text, scenario, &[]).map_err(to_py)?;
    let table = py.detach(|| coolcorr::cli::commands::run(&cfg)).map_err(to_py)?;
    let mut cols: BTreeMap<usize, Vec<Py<PyAny>>> = BTreeMap::new();
    for row in &table.rows {
        for (k, cell) in row.iter().enumerate() {
            let v = match cell {
                Cell::Num(x) => x.into_pyobject(py)?.into_any().unbind(),
                Cell::Int(i) => i.into_pyobject(py)?.into_any().unbind(),
                Cell::Text(s) => s.into_pyobject(py)?.into_any().unbind(),
            };
            cols.entry(k).or_default().push(v);
        }
    }
    let d = PyDict::new(py);
    for (k, name) in table.columns.iter().enumerate() {
        d.set_item(name, cols.remove(&k).unwrap_or_default())?;
    }
    Ok((cfg.hash(), d))
}

#[pymodule]
fn coolcorr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gibbs_populations, m)?)?;
    m.add_function(wrap_pyfunction!(universal_bound_state, m)?)?;
    m.add_function(wrap_pyfunction!(one_qubit_work, m)?)?;
    m.add_function(wrap_pyfunction!(min_work, m)?)?;
    m.add_function(wrap_pyfunction!(jaynes_bound, m)?)?;
    m.add_function(wrap_pyfunction!(pure_state_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_thermalization, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
