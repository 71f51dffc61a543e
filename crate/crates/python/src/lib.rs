//! Python access to the `prp` command set. Each call returns the same report the CLI prints.

use prp_core::cli::{run_on_text, Command, RunOptions};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn command(name: &str) -> PyResult<Command> {
    Command::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown command {name:?}")))
}

/// Runs `command` on an instance given as JSON text.
///
/// Returns `(exit_code, report)` where `report` is a dict.
#[pyfunction]
#[pyo3(signature = (command_name, instance_json, weights_json=None, seed=0, tol=None, max_steps=None))]
fn run<'py>(
    py: Python<'py>,
    command_name: &str,
    instance_json: &str,
    weights_json: Option<&str>,
    seed: u64,
    tol: Option<f64>,
    max_steps: Option<usize>,
) -> PyResult<(i32, Bound<'py, PyDict>)> {
    let cmd = command(command_name)?;
    let opts = RunOptions { seed, tol, max_steps };
    let (code, report) = py.detach(|| run_on_text(cmd, instance_json, weights_json, &opts));
    let json = py.import("json")?;
    let dict = json.call_method1("loads", (report.to_string(),))?.cast_into::<PyDict>()?;
    Ok((code, dict))
}

/// Command names accepted by `run`.
#[pyfunction]
fn commands() -> Vec<&'static str> {
    Command::ALL.iter().map(|c| c.name()).collect()
}

#[pymodule]
fn prp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(commands, m)?)?;
    Ok(())
}
