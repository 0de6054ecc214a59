//! Python module `qpe_bounds`.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qpe_bounds::bounds;
use qpe_bounds::estimators::{self, Estimate};
use qpe_bounds::fim;
use qpe_bounds::schedules;
use qpe_bounds::simulate::{self, HtRecord, HtSample, QftSample};
use qpe_bounds::{BlockFim, PhaseFamily, ProtocolKind, QpeError};

fn err(e: QpeError) -> PyErr {
    match e {
        QpeError::SingularFim { .. } | QpeError::NormalizationFailure { .. } | QpeError::NoPeaksDetected => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn kind(name: &str) -> PyResult<ProtocolKind> {
    name.parse().map_err(|e: QpeError| err(e))
}

fn family(name: &str) -> PyResult<PhaseFamily> {
    match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "uniform" => Ok(PhaseFamily::Uniform),
        "head_dense" => Ok(PhaseFamily::HeadDense),
        "tail_dense" => Ok(PhaseFamily::TailDense),
        other => Err(PyValueError::new_err(format!("unknown phase family {other:?}"))),
    }
}

/// Eigenphases and overlaps of the initial state.
#[pyclass(name = "Spectrum", frozen)]
#[derive(Clone)]
struct PySpectrum(qpe_bounds::Spectrum);

#[pymethods]
impl PySpectrum {
    #[new]
    fn new(phases: Vec<f64>, overlaps: Vec<f64>) -> PyResult<Self> {
        qpe_bounds::Spectrum::new(phases, overlaps).map(Self).map_err(err)
    }

    /// Geometric overlaps over a named phase family.
    #[staticmethod]
    fn geometric(family_name: &str, modes: usize, alpha: f64) -> PyResult<Self> {
        qpe_bounds::Spectrum::geometric(family(family_name)?, modes, alpha)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn eigenstate(phase: f64) -> PyResult<Self> {
        qpe_bounds::Spectrum::eigenstate(phase).map(Self).map_err(err)
    }

    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.0.phases().to_vec()
    }

    #[getter]
    fn overlaps(&self) -> Vec<f64> {
        self.0.overlaps().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels().to_vec()
    }

    fn second_moment(&self) -> f64 {
        self.0.second_moment()
    }

    fn phase_of(&self, label: usize) -> PyResult<f64> {
        self.0.phase_of(label).map_err(err)
    }

    fn overlap_of(&self, label: usize) -> PyResult<f64> {
        self.0.overlap_of(label).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Spectrum(modes={})", self.0.len())
    }
}

/// Block Fisher information matrix over `(theta, c)`.
#[pyclass(name = "Fim", frozen)]
struct PyFim(BlockFim);

#[pymethods]
impl PyFim {
    #[getter]
    fn modes(&self) -> usize {
        self.0.modes
    }

    #[getter]
    fn sum_pinned(&self) -> bool {
        self.0.sum_pinned
    }

    /// Full `2L x 2L` matrix as nested lists.
    fn full(&self) -> Vec<Vec<f64>> {
        let n = self.0.dim();
        self.0.full().chunks(n).map(<[f64]>::to_vec).collect()
    }

    fn theta_diag(&self, label: usize) -> PyResult<f64> {
        self.0.theta_diag(label).map_err(err)
    }

    fn crlb_full(&self, label: usize) -> PyResult<f64> {
        bounds::crlb_full(&self.0, label).map_err(err)
    }

    fn crlb_diag(&self, label: usize) -> PyResult<f64> {
        bounds::crlb_diag(&self.0, label).map_err(err)
    }

    fn diag_ratio(&self, label: usize) -> PyResult<f64> {
        bounds::diag_ratio(&self.0, label).map_err(err)
    }
}

#[pyfunction]
fn qft_fim(s: &PySpectrum, n_ancillas: u32) -> PyResult<PyFim> {
    fim::qft_fim(&s.0, n_ancillas).map(PyFim).map_err(err)
}

#[pyfunction]
fn ht_fim(s: &PySpectrum, t: f64) -> PyFim {
    PyFim(fim::ht_fim_single(&s.0, t))
}

#[pyfunction]
#[pyo3(signature = (s, kind_name, max_time, n_times=1, n_shots=1))]
fn total_fim(s: &PySpectrum, kind_name: &str, max_time: f64, n_times: usize, n_shots: usize) -> PyResult<PyFim> {
    fim::total_fim(&s.0, kind(kind_name)?, max_time, n_times, n_shots)
        .map(PyFim)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (s, kind_name, max_time, n_times=1, n_shots=1, label=0))]
fn g_i(s: &PySpectrum, kind_name: &str, max_time: f64, n_times: usize, n_shots: usize, label: usize) -> PyResult<f64> {
    fim::g_i(&s.0, kind(kind_name)?, max_time, n_times, n_shots, label).map_err(err)
}

#[pyfunction]
fn f_i_max(s: &PySpectrum, label: usize) -> PyResult<f64> {
    fim::f_i_max(&s.0, label).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (s, kind_name, max_time, n_times=1, n_shots=1, label=0))]
fn cost_product_bound(
    s: &PySpectrum,
    kind_name: &str,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> PyResult<f64> {
    bounds::cost_product_bound(&s.0, kind(kind_name)?, max_time, n_times, n_shots, label).map_err(err)
}

/// All bounds for one protocol configuration, as a dict.
#[pyfunction]
#[pyo3(signature = (s, kind_name, max_time, n_times=1, n_shots=1, label=0))]
fn bound_report<'py>(
    py: Python<'py>,
    s: &PySpectrum,
    kind_name: &str,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = bounds::bound_report(&s.0, kind(kind_name)?, max_time, n_times, n_shots, label).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("crlb_full", r.crlb_full)?;
    d.set_item("crlb_diag", r.crlb_diag)?;
    d.set_item("diag_ratio", r.diag_ratio)?;
    d.set_item("cost_product_bound", r.cost_product_bound)?;
    d.set_item("target_index", r.target_index)?;
    d.set_item("condition", r.condition)?;
    Ok(d)
}

#[pyfunction]
fn rpe_fim_bounds(s: &PySpectrum, max_time: f64, n_shots: usize, label: usize) -> PyResult<(f64, f64)> {
    bounds::rpe_fim_bounds(&s.0, max_time, n_shots, label).map_err(err)
}

/// QFT-QPE outcomes in `[0, 2^n)`.
#[pyfunction]
fn sample_qft(s: &PySpectrum, n_ancillas: u32, n_shots: usize, seed: u64) -> PyResult<Vec<u64>> {
    simulate::sample_qft(&s.0, n_ancillas, n_shots, seed)
        .map(|q| q.outcomes)
        .map_err(err)
}

/// Hadamard-test data `(times, z_hat)` for a protocol's schedule.
#[pyfunction]
fn sample_ht(
    s: &PySpectrum,
    kind_name: &str,
    max_time: f64,
    n_times: usize,
    n_shots: u64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<Complex64>)> {
    let schedule = schedules::realize(kind(kind_name)?, max_time, n_times, seed).map_err(err)?;
    let data = simulate::sample_ht(&s.0, &schedule, n_shots, seed.wrapping_add(1)).map_err(err)?;
    Ok((data.times(), data.z_hat))
}

fn ht_data(times: Vec<f64>, z_hat: Vec<Complex64>) -> PyResult<HtSample> {
    if times.len() != z_hat.len() {
        return Err(PyValueError::new_err("times and z_hat differ in length"));
    }
    let records = times
        .into_iter()
        .map(|t| HtRecord {
            t,
            n_re0: 0,
            n_re1: 0,
            n_im0: 0,
            n_im1: 0,
        })
        .collect();
    Ok(HtSample {
        records,
        z_hat,
        n_shots: 0,
        seed: 0,
    })
}

fn estimate_dict<'py>(py: Python<'py>, e: Estimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("theta_hat", e.theta_hat)?;
    d.set_item("phases", e.phases)?;
    d.set_item("amplitudes", e.amplitudes)?;
    d.set_item("residual", e.diagnostics.residual)?;
    d.set_item("iterations", e.diagnostics.iterations)?;
    Ok(d)
}

#[pyfunction]
fn estimate_qmegs<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    z_hat: Vec<Complex64>,
    max_time: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let e = estimators::estimate_qmegs(&ht_data(times, z_hat)?, max_time, 1.0, true).map_err(err)?;
    estimate_dict(py, e)
}

#[pyfunction]
fn estimate_qcels<'py>(py: Python<'py>, times: Vec<f64>, z_hat: Vec<Complex64>) -> PyResult<Bound<'py, PyDict>> {
    let e = estimators::estimate_qcels(&ht_data(times, z_hat)?).map_err(err)?;
    estimate_dict(py, e)
}

#[pyfunction]
#[pyo3(signature = (times, z_hat, sparsity=4))]
fn estimate_csqpe<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    z_hat: Vec<Complex64>,
    sparsity: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let e = estimators::estimate_csqpe(&ht_data(times, z_hat)?, sparsity).map_err(err)?;
    estimate_dict(py, e)
}

#[pyfunction]
fn estimate_curvefit_qft<'py>(py: Python<'py>, outcomes: Vec<u64>, n_ancillas: u32) -> PyResult<Bound<'py, PyDict>> {
    let sample = QftSample {
        outcomes,
        n: n_ancillas,
        seed: 0,
    };
    if sample.outcomes.iter().any(|&y| y >= sample.grid()) {
        return Err(PyValueError::new_err("outcome outside [0, 2^n)"));
    }
    let e = estimators::estimate_curvefit_qft(&sample).map_err(err)?;
    estimate_dict(py, e)
}

#[pyfunction]
fn phase_error(theta_hat: f64, theta: f64) -> f64 {
    estimators::phase_error(theta_hat, theta)
}

#[pymodule]
#[pyo3(name = "qpe_bounds")]
fn qpe_bounds_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyFim>()?;
    m.add_function(wrap_pyfunction!(qft_fim, m)?)?;
    m.add_function(wrap_pyfunction!(ht_fim, m)?)?;
    m.add_function(wrap_pyfunction!(total_fim, m)?)?;
    m.add_function(wrap_pyfunction!(g_i, m)?)?;
    m.add_function(wrap_pyfunction!(f_i_max, m)?)?;
    m.add_function(wrap_pyfunction!(cost_product_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(rpe_fim_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_qft, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ht, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_qmegs, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_qcels, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_csqpe, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_curvefit_qft, m)?)?;
    m.add_function(wrap_pyfunction!(phase_error, m)?)?;
    Ok(())
}
