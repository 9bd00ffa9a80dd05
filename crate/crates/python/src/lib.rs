//! Python bindings for the reserve model.

use std::collections::HashMap;
use std::path::Path;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use reserve_dyn_core::cli::exit_code;
use reserve_dyn_core::config::{load_config, LoadedConfig};
use reserve_dyn_core::reliability::{ClusteredFleet, Evaluator, FleetReserve, Variant};
use reserve_dyn_core::thermal::{steady_cycle_times as cycle, DeviceParams, HysteresisBand};
use reserve_dyn_core::Error;

fn py_err(e: Error) -> PyErr {
    if exit_code(&e) == 3 {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn load(config: &str) -> PyResult<LoadedConfig> {
    load_config(Path::new(config)).map_err(py_err)
}

fn variant(name: &str) -> PyResult<Variant> {
    match name {
        "woor" => Ok(Variant::WoOR),
        "ort" => Ok(Variant::Ort),
        "hybrid" => Ok(Variant::Hybrid),
        other => Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
    }
}

/// Steady (on, off) durations in hours for one device.
#[pyfunction]
#[pyo3(signature = (capacitance, resistance, power_kw, setpoint, ambient, cop = 2.5, deadband = 1.0))]
fn steady_cycle_times(
    capacitance: f64,
    resistance: f64,
    power_kw: f64,
    setpoint: f64,
    ambient: f64,
    cop: f64,
    deadband: f64,
) -> PyResult<(f64, f64)> {
    let params = DeviceParams::new(capacitance, resistance, power_kw, cop).map_err(py_err)?;
    let band = HysteresisBand::new(setpoint, deadband).map_err(py_err)?;
    let c = cycle(&params, &band, ambient).map_err(py_err)?;
    Ok((c.on, c.off))
}

/// Deterministic aggregate power and reserve of the clustered fleet.
#[pyfunction]
fn aggregate(py: Python<'_>, config: &str) -> PyResult<HashMap<String, Vec<f64>>> {
    let s = load(config)?.scenario().map_err(py_err)?;
    py.detach(|| {
        let fleet = ClusteredFleet::build(&s)?;
        let times = s.times();
        let power = times.iter().map(|&t| fleet.power(t)).collect::<Result<Vec<_>, _>>()?;
        let reserve = power.iter().map(|p| power[0] - p).collect();
        Ok(HashMap::from([
            ("times_h".to_string(), times),
            ("power_mw".to_string(), power),
            ("reserve_mw".to_string(), reserve),
        ]))
    })
    .map_err(py_err)
}

/// Reserve capacity levels and their probabilities at `minute`.
#[pyfunction]
fn reserve_states(py: Python<'_>, config: &str, minute: f64) -> PyResult<Vec<(f64, f64)>> {
    let s = load(config)?.scenario().map_err(py_err)?;
    py.detach(|| {
        let fleet = FleetReserve::build(&s)?;
        let t = minute / 60.0;
        let k = fleet
            .times_h
            .iter()
            .position(|x| (x - t).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidArgument(format!("{minute} min is not on the time grid")))?;
        Ok(fleet.ort_lz(k, s.t_s, s.standby_failure).iter().collect())
    })
    .map_err(py_err)
}

/// Analytical system-level reliability indices over the horizon.
#[pyfunction]
#[pyo3(signature = (config, variant = "ort"))]
fn evaluate(py: Python<'_>, config: &str, variant: &str) -> PyResult<HashMap<String, Vec<f64>>> {
    let v = self::variant(variant)?;
    let s = load(config)?.scenario().map_err(py_err)?;
    py.detach(|| {
        let idx = Evaluator::new(s)?.evaluate(v)?.indices;
        Ok(HashMap::from([
            ("times_h".to_string(), idx.times_h),
            ("lolp".to_string(), idx.lolp_system),
            ("expected_lc_mw".to_string(), idx.expected_lc_system),
            ("eens_mwh".to_string(), idx.eens_system),
            ("lole_h".to_string(), idx.lole_system),
        ]))
    })
    .map_err(py_err)
}

/// SHA-256 of the canonical configuration.
#[pyfunction]
fn config_hash(config: &str) -> PyResult<String> {
    load(config)?.hash().map_err(py_err)
}

#[pymodule]
fn reserve_dyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(steady_cycle_times, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(reserve_states, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
