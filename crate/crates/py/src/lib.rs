// SPDX-License-Identifier: Apache-2.0

//! Python module `rvbsim`.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use rvb_core::config::Config;
use rvb_core::control::{self, CalibrationUncertainty};
use rvb_core::hamiltonians;
use rvb_core::spin::SpinState;
use rvb_core::{analysis, dynamics, experiments, spin, verify};

fn err(e: rvb_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn init_state(name: &str) -> PyResult<SpinState> {
    Ok(match name {
        "singlet_x" => spin::singlet_x(),
        "singlet_y" => spin::singlet_y(),
        "s_wave" => spin::s_wave(),
        "d_wave" => spin::d_wave(),
        "t34_s12" => experiments::init_t34_s12(),
        "t23_s14" => experiments::init_t23_s14().map_err(err)?,
        other => return Err(PyKeyError::new_err(format!("unknown initial state {other}"))),
    })
}

/// Exchange couplings (MHz) on the four bonds of the plaquette.
#[pyclass(name = "ExchangeConfig", from_py_object)]
#[derive(Clone)]
struct PyExchange {
    inner: hamiltonians::ExchangeConfig,
}

#[pymethods]
impl PyExchange {
    #[new]
    fn new(j12: f64, j34: f64, j23: f64, j14: f64) -> PyResult<Self> {
        Ok(Self {
            inner: hamiltonians::ExchangeConfig::new(j12, j34, j23, j14).map_err(err)?,
        })
    }

    #[staticmethod]
    fn balanced(jx: f64, jy: f64) -> PyResult<Self> {
        Ok(Self {
            inner: hamiltonians::ExchangeConfig::balanced(jx, jy).map_err(err)?,
        })
    }

    #[getter]
    fn jx(&self) -> f64 {
        self.inner.jx()
    }

    #[getter]
    fn jy(&self) -> f64 {
        self.inner.jy()
    }

    fn as_dict(&self) -> HashMap<&'static str, f64> {
        self.inner.named().into_iter().collect()
    }

    fn __repr__(&self) -> String {
        let j = &self.inner;
        format!("ExchangeConfig(j12={}, j34={}, j23={}, j14={})", j.j12, j.j34, j.j23, j.j14)
    }
}

/// Result of a damped-cosine fit.
#[pyclass(name = "FitResult", get_all)]
struct PyFit {
    a: f64,
    f: f64,
    phi: f64,
    t_phi: f64,
    a0: f64,
    sigma_f: f64,
    residual_rms: f64,
}

#[pymethods]
impl PyFit {
    fn __repr__(&self) -> String {
        format!(
            "FitResult(a={:.4}, f={:.4}, phi={:.4}, t_phi={:.2}, a0={:.4})",
            self.a, self.f, self.phi, self.t_phi, self.a0
        )
    }
}

#[pyfunction]
fn f_ss(jx: f64, jy: f64) -> PyResult<f64> {
    dynamics::f_ss(jx, jy).map_err(err)
}

#[pyfunction]
fn visibilities(jx: f64, jy: f64) -> PyResult<(f64, f64)> {
    dynamics::visibilities(jx, jy).map_err(err)
}

#[pyfunction]
fn f_st_exact(j: &PyExchange) -> PyResult<f64> {
    dynamics::f_st_exact(&j.inner).map_err(err)
}

#[pyfunction]
fn f_st_perturbative(j: &PyExchange) -> PyResult<f64> {
    dynamics::f_st_perturbative(&j.inner).map_err(err)
}

#[pyfunction]
fn p_st_degenerate(j: f64, delta_x: f64, delta_y: f64, t_ns: f64) -> f64 {
    dynamics::p_st_degenerate(j, delta_x, delta_y, t_ns)
}

#[pyfunction]
fn exchange_from_voltages(j0x: f64, j0y: f64, dvx: f64, dvy: f64) -> PyResult<PyExchange> {
    let m = control::ExchangeVoltageModel::new(j0x, j0y, control::DEFAULT_KAPPA).map_err(err)?;
    Ok(PyExchange {
        inner: m.exchange_from_voltages(dvx, dvy).map_err(err)?,
    })
}

#[pyfunction]
fn calibration_error(j0x: f64, j0y: f64, sigma_mv: f64) -> PyResult<(f64, f64)> {
    let m = control::ExchangeVoltageModel::new(j0x, j0y, control::DEFAULT_KAPPA).map_err(err)?;
    control::propagate_calibration_error(&m, &CalibrationUncertainty::symmetric(sigma_mv)).map_err(err)
}

/// Outcome probabilities `[SS, ST, TS, TT]` in both readout directions at
/// each dwell time, optionally averaged over quasi-static noise.
#[pyfunction]
#[pyo3(signature = (init, j, times_ns, t_phi_ns=None, n_samples=200, seed=0))]
fn simulate(
    init: &str,
    j: &PyExchange,
    times_ns: Vec<f64>,
    t_phi_ns: Option<f64>,
    n_samples: usize,
    seed: u64,
) -> PyResult<Vec<[[f64; 4]; 2]>> {
    let seq = experiments::set_and_dwell(init_state(init)?, j.inner, &times_ns);
    let noise = t_phi_ns
        .map(|t| dynamics::NoiseModel::from_t_phi(t, n_samples, seed))
        .transpose()
        .map_err(err)?;
    experiments::observe_readouts(&seq, noise.as_ref()).map_err(err)
}

#[pyfunction]
fn fit_damped_cosine(t: Vec<f64>, p: Vec<f64>) -> PyResult<PyFit> {
    let r = analysis::fit_damped_cosine(&t, &p).map_err(err)?;
    Ok(PyFit {
        a: r.a,
        f: r.f,
        phi: r.phi,
        t_phi: r.t_phi,
        a0: r.a0,
        sigma_f: r.sigma_f(),
        residual_rms: r.residual_rms,
    })
}

/// Panels of a figure as `{panel: {column: values}}`.
#[pyfunction]
#[pyo3(signature = (name, seed=0, spec=None))]
fn figure(name: &str, seed: u64, spec: Option<PathBuf>) -> PyResult<HashMap<String, HashMap<String, Vec<f64>>>> {
    let cfg = match spec {
        Some(p) => Config::from_file(&p).map_err(err)?,
        None => Config::default(),
    };
    let out = experiments::compute_figure(name, &cfg, seed).map_err(err)?;
    Ok(out
        .panels
        .iter()
        .map(|p| {
            let cols = p
                .header
                .iter()
                .map(|h| (h.clone(), p.column(h).unwrap_or_default()))
                .collect();
            (p.name.clone(), cols)
        })
        .collect())
}

/// Runs one acceptance criterion (1-10); returns `(passed, detail)`.
#[pyfunction]
#[pyo3(signature = (k, seed=0))]
fn criterion(k: usize, seed: u64) -> PyResult<(bool, String)> {
    let c = verify::CRITERIA
        .get(k.wrapping_sub(1))
        .ok_or_else(|| PyKeyError::new_err(format!("no criterion {k}")))?;
    let r = c(seed);
    Ok((r.passed, r.detail))
}

#[pymodule]
fn rvbsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExchange>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(f_ss, m)?)?;
    m.add_function(wrap_pyfunction!(visibilities, m)?)?;
    m.add_function(wrap_pyfunction!(f_st_exact, m)?)?;
    m.add_function(wrap_pyfunction!(f_st_perturbative, m)?)?;
    m.add_function(wrap_pyfunction!(p_st_degenerate, m)?)?;
    m.add_function(wrap_pyfunction!(exchange_from_voltages, m)?)?;
    m.add_function(wrap_pyfunction!(calibration_error, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_damped_cosine, m)?)?;
    m.add_function(wrap_pyfunction!(figure, m)?)?;
    m.add_function(wrap_pyfunction!(criterion, m)?)?;
    m.add("FIGURES", experiments::FIGURES.to_vec())?;
    Ok(())
}
