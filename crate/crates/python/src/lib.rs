//! Python bindings: scenario generation, exact and baseline placement,
//! power evaluation, and LP export, all exchanging JSON strings with the
//! same schemas as the scenario and result files.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fogpon::model::{Placement, Scenario, Topology};
use fogpon::power::total_power;
use fogpon::scenario::{baseline_place, default_topology, generate_scenario, GeneratorParams};
use fogpon::solver::{brute_force_oracle, solve_exact, SolverConfig};
use fogpon::{build_milp, check_feasibility, validate_scenario, write_lp};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_scenario(text: &str) -> PyResult<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(err)?;
    validate_scenario(scenario).map_err(|v| {
        err(v
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("; "))
    })
}

fn parse_placement(text: &str) -> PyResult<Placement> {
    serde_json::from_str(text).map_err(err)
}

/// The built-in 3-cell x 2-rack x 4-server fabric, as scenario-file JSON.
#[pyfunction]
fn default_topology_json() -> PyResult<String> {
    serde_json::to_string(&default_topology()).map_err(err)
}

/// Generates a seeded scenario; `topology_json` defaults to the built-in fabric.
#[pyfunction]
#[pyo3(signature = (n_vms, seed, topology_json=None))]
fn generate(n_vms: usize, seed: u64, topology_json: Option<&str>) -> PyResult<String> {
    let topo: Topology = match topology_json {
        Some(text) => serde_json::from_str(text).map_err(err)?,
        None => default_topology(),
    };
    let scenario = generate_scenario(&GeneratorParams::new(n_vms, seed), &topo).map_err(err)?;
    serde_json::to_string(&scenario).map_err(err)
}

/// Exact branch-and-bound solve; returns the result as JSON
/// (status, assignment, power breakdown, nodes, root bound).
#[pyfunction]
#[pyo3(signature = (scenario_json, node_limit=None, symmetry_breaking=None))]
fn solve(
    scenario_json: &str,
    node_limit: Option<u64>,
    symmetry_breaking: Option<bool>,
) -> PyResult<String> {
    let scenario = parse_scenario(scenario_json)?;
    let mut cfg = SolverConfig::default();
    if let Some(n) = node_limit {
        cfg.node_limit = n;
    }
    if let Some(s) = symmetry_breaking {
        cfg.symmetry_breaking = s;
    }
    serde_json::to_string(&solve_exact(&scenario, &cfg)).map_err(err)
}

/// Exhaustive-enumeration oracle (at most 8 VMs and 6 servers).
#[pyfunction]
fn oracle(scenario_json: &str) -> PyResult<String> {
    let scenario = parse_scenario(scenario_json)?;
    let result = brute_force_oracle(&scenario).map_err(err)?;
    serde_json::to_string(&result).map_err(err)
}

/// Random baseline placement; raises when no feasible draw is found.
#[pyfunction]
fn baseline(scenario_json: &str, seed: u64) -> PyResult<String> {
    let scenario = parse_scenario(scenario_json)?;
    let placement = baseline_place(&scenario, seed).map_err(err)?;
    serde_json::to_string(&placement).map_err(err)
}

/// Power breakdown of a placement (`{"assignment": {vm: server}}`).
#[pyfunction]
fn power(scenario_json: &str, placement_json: &str) -> PyResult<String> {
    let scenario = parse_scenario(scenario_json)?;
    let placement = parse_placement(placement_json)?;
    serde_json::to_string(&total_power(&placement, &scenario)).map_err(err)
}

/// Constraint violations of a placement, as a JSON list (empty = feasible).
#[pyfunction]
fn feasibility(scenario_json: &str, placement_json: &str) -> PyResult<String> {
    let scenario = parse_scenario(scenario_json)?;
    let placement = parse_placement(placement_json)?;
    serde_json::to_string(&check_feasibility(&placement, &scenario)).map_err(err)
}

/// LP-format text of the scenario's MILP.
#[pyfunction]
fn export_lp(scenario_json: &str) -> PyResult<String> {
    let scenario = parse_scenario(scenario_json)?;
    let inst = build_milp(&scenario).map_err(err)?;
    Ok(write_lp(&inst))
}

#[pymodule]
fn fogpon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_topology_json, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(power, m)?)?;
    m.add_function(wrap_pyfunction!(feasibility, m)?)?;
    m.add_function(wrap_pyfunction!(export_lp, m)?)?;
    Ok(())
}
