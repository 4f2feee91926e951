//! Python bindings: maps, pipeline generation, Markov analysis,
//! post-processing and the test battery.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use zigzag_trng::analysis::correlation;
use zigzag_trng::analysis::density::{fp_fixed_point, DEFAULT_FP_TOL};
use zigzag_trng::analysis::markov::{self, MarkovModel, TransitionCounts};
use zigzag_trng::postprocess::{self, DebiasConfig, PostprocessPlan};
use zigzag_trng::stats::{self, BatteryConfig, TestReport, TestStatus};
use zigzag_trng::{BitStream, Error, GeneralizedZigzagParams, InitialState, PiecewiseAffineMap, SimConfig};

create_exception!(zigzag_trng, OrbitEscapeError, PyRuntimeError, "A noisy orbit left the map's guard band.");

fn to_py(err: Error) -> PyErr {
    match err {
        Error::OrbitEscape { .. } => OrbitEscapeError::new_err(err.to_string()),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::NoConvergence { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for zigzag_trng::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// A piecewise-affine chaotic map.
#[pyclass(name = "Map", module = "zigzag_trng", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMap(PiecewiseAffineMap);

#[pymethods]
impl PyMap {
    #[staticmethod]
    fn zigzag() -> Self {
        Self(PiecewiseAffineMap::zigzag())
    }

    #[staticmethod]
    fn generalized_zigzag(m: f64) -> PyResult<Self> {
        Ok(Self(PiecewiseAffineMap::generalized_zigzag(GeneralizedZigzagParams::new(m).py_err()?)))
    }

    #[staticmethod]
    fn tent() -> Self {
        Self(PiecewiseAffineMap::tent())
    }

    #[staticmethod]
    fn bernoulli() -> Self {
        Self(PiecewiseAffineMap::bernoulli())
    }

    /// Tent map with rising/falling slope deviations `dg1`, `dg2`.
    #[staticmethod]
    fn nonideal(dg1: f64, dg2: f64) -> PyResult<Self> {
        Ok(Self(PiecewiseAffineMap::nonideal(dg1, dg2).py_err()?.0))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self(PiecewiseAffineMap::from_json(s).py_err()?))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        self.0.domain()
    }

    fn __call__(&self, x: f64) -> PyResult<f64> {
        self.0.eval(x).py_err()
    }

    /// Noisy orbit of `n` states starting after `x0`.
    #[pyo3(signature = (x0, n, noise_std = 0.0, seed = 0))]
    fn orbit(&self, x0: f64, n: usize, noise_std: f64, seed: u64) -> PyResult<Vec<f64>> {
        zigzag_trng::iterate_orbit(&self.0, x0, n, noise_std, seed).py_err()
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py_err()
    }

    fn __repr__(&self) -> String {
        format!("Map({}, domain={:?})", self.0.kind().as_str(), self.0.domain())
    }
}

/// Packed bit sequence with generation metadata.
#[pyclass(name = "BitStream", module = "zigzag_trng", frozen)]
struct PyBitStream(BitStream);

#[pymethods]
impl PyBitStream {
    #[new]
    fn new(bits: Vec<u8>) -> PyResult<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(PyValueError::new_err("bits must be 0 or 1"));
        }
        Ok(Self(BitStream::from_bits(&bits)))
    }

    /// Reads a packed stream (with sidecar) or an ASCII `0`/`1` file.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(Self(BitStream::read_any(&path).py_err()?))
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        self.0.write(&path).py_err()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// One byte (0 or 1) per bit.
    fn to_bits<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bits())
    }

    fn count_ones(&self) -> usize {
        self.0.count_ones()
    }

    /// Metadata sidecar as JSON.
    fn meta_json(&self) -> String {
        serde_json::to_string(self.0.meta()).expect("metadata is plain data")
    }

    fn __repr__(&self) -> String {
        format!("BitStream(len={}, ones={})", self.0.len(), self.0.count_ones())
    }
}

/// Runs maps in a ring pipeline, one per stage, and collects `n_bits` bits.
#[pyfunction]
#[pyo3(signature = (maps, n_bits, seed = 0, noise_std = zigzag_trng::dynamics::DEFAULT_NOISE_STD, discard = 0, x0 = None))]
fn generate(
    maps: Vec<PyRef<'_, PyMap>>,
    n_bits: usize,
    seed: u64,
    noise_std: f64,
    discard: usize,
    x0: Option<f64>,
) -> PyResult<PyBitStream> {
    let stage_maps: Vec<_> = maps.iter().map(|m| m.0.clone()).collect();
    let cfg = SimConfig {
        noise_std,
        seed,
        stages: stage_maps.len(),
        n_bits,
        discard,
        x0: x0.map_or(InitialState::Auto, InitialState::Fixed),
    };
    Ok(PyBitStream(zigzag_trng::run_pipeline(&stage_maps, &cfg).py_err()?))
}

/// Per-stage non-ideal maps drawn with device spread `sigma_device`.
#[pyfunction]
fn varied_maps(sigma_device: f64, stages: usize, seed: u64) -> PyResult<Vec<PyMap>> {
    let scenario = zigzag_trng::sample_slope_deltas(sigma_device, stages, seed).py_err()?;
    Ok(scenario.stage_maps().py_err()?.into_iter().map(PyMap).collect())
}

#[pyfunction]
fn warmup_discard(gain: f64, pd_over_n: f64) -> PyResult<usize> {
    zigzag_trng::warmup_discard(gain, pd_over_n).py_err()
}

/// Two-state Markov description of a bit source.
#[pyclass(name = "MarkovModel", module = "zigzag_trng", frozen)]
struct PyMarkov(MarkovModel);

#[pymethods]
impl PyMarkov {
    #[new]
    fn new(p: f64, q: f64) -> PyResult<Self> {
        Ok(Self(MarkovModel::new(p, q).py_err()?))
    }

    /// First-order closed form for slope deviations `dg1`, `dg2`.
    #[staticmethod]
    fn analytic(dg1: f64, dg2: f64) -> PyResult<Self> {
        Ok(Self(markov::transition_probs_analytic(dg1, dg2).py_err()?))
    }

    /// Transition probabilities from the map's discretized stationary density.
    #[staticmethod]
    #[pyo3(signature = (dg1, dg2, bins = 4096))]
    fn numeric(dg1: f64, dg2: f64, bins: usize) -> PyResult<Self> {
        let (map, params) = PiecewiseAffineMap::nonideal(dg1, dg2).py_err()?;
        let density = fp_fixed_point(&map, bins, DEFAULT_FP_TOL).py_err()?;
        Ok(Self(markov::transition_probs_numeric(&params, &density).py_err()?))
    }

    /// Estimates `p` and `q` from consecutive-bit transitions.
    #[staticmethod]
    fn from_stream(bits: &PyBitStream) -> PyResult<Self> {
        Ok(Self(TransitionCounts::from_bits(&bits.0).to_model().py_err()?))
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }

    #[getter]
    fn q(&self) -> f64 {
        self.0.q
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }

    #[getter]
    fn lambda1(&self) -> f64 {
        self.0.lambda1
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c
    }

    /// `(exact, closed_form)` bias; the closed form lacks the factor 2.
    fn bias(&self) -> PyResult<(f64, f64)> {
        let r = markov::bias_of(&self.0).py_err()?;
        Ok((r.exact, r.closed_form))
    }

    fn lag_correlation(&self, k: u32) -> f64 {
        self.0.lag_correlation(k)
    }

    fn __repr__(&self) -> String {
        format!(
            "MarkovModel(p={:.6}, q={:.6}, b={:.6}, lambda1={:.6})",
            self.0.p, self.0.q, self.0.b, self.0.lambda1
        )
    }
}

#[pyfunction]
fn choose_l(model: &PyMarkov, epsilon: f64, stages: usize) -> PyResult<usize> {
    postprocess::choose_l(&model.0, epsilon, stages).py_err()
}

/// One XOR shift-register pass of length `l`.
#[pyfunction]
fn xor_debias(bits: &PyBitStream, l: usize, stages: usize) -> PyResult<PyBitStream> {
    let cfg = DebiasConfig::new(l, stages).py_err()?;
    Ok(PyBitStream(postprocess::xor_debias(&bits.0, &cfg).py_err()?))
}

#[pyfunction]
fn von_neumann(bits: &PyBitStream) -> PyBitStream {
    PyBitStream(postprocess::von_neumann(&bits.0))
}

/// Two-pass XOR post-processing sized from the stream's own statistics.
/// Returns the processed stream and the `(l, l2)` register lengths.
#[pyfunction]
#[pyo3(signature = (bits, stages, epsilon = postprocess::DEFAULT_EPSILON))]
fn postprocess_auto(bits: &PyBitStream, stages: usize, epsilon: f64) -> PyResult<(PyBitStream, (usize, Option<usize>))> {
    let plan = PostprocessPlan::auto(&bits.0, epsilon, stages).py_err()?;
    Ok((PyBitStream(plan.apply(&bits.0).py_err()?), (plan.l, plan.l2)))
}

#[pyfunction]
fn autocorrelation(bits: &PyBitStream, max_lag: usize) -> PyResult<Vec<f64>> {
    correlation::autocorrelation(&bits.0, max_lag).py_err()
}

/// Outcome of the randomness test battery.
#[pyclass(name = "TestReport", module = "zigzag_trng", frozen)]
struct PyReport(TestReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn passed(&self) -> usize {
        self.0.passed
    }

    #[getter]
    fn executed(&self) -> usize {
        self.0.executed
    }

    #[getter]
    fn bias_percent(&self) -> f64 {
        self.0.bias_percent
    }

    fn all_passed(&self) -> bool {
        self.0.all_passed()
    }

    fn names(&self) -> Vec<String> {
        self.0.tests.iter().map(|t| t.name.clone()).collect()
    }

    /// `(p_values, status)` for one test; status is pass, fail or insufficient_data.
    fn result(&self, name: &str) -> PyResult<(Vec<f64>, &'static str)> {
        let t = self
            .0
            .get(name)
            .ok_or_else(|| PyValueError::new_err(format!("no test named {name:?}")))?;
        let status = match t.status {
            TestStatus::Pass => "pass",
            TestStatus::Fail => "fail",
            TestStatus::InsufficientData => "insufficient_data",
        };
        Ok((t.p_values.clone(), status))
    }

    fn failures(&self) -> Vec<String> {
        self.0.failures().map(|t| t.name.clone()).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py_err()
    }

    fn to_table(&self) -> String {
        self.0.to_table()
    }

    fn __repr__(&self) -> String {
        format!("TestReport(passed={}/{}, n_bits={})", self.0.passed, self.0.executed, self.0.n_bits)
    }
}

/// Runs the full battery. The GIL is released while the tests run.
#[pyfunction]
#[pyo3(signature = (bits, alpha = stats::DEFAULT_ALPHA))]
fn run_battery(py: Python<'_>, bits: &PyBitStream, alpha: f64) -> PyResult<PyReport> {
    let stream = &bits.0;
    let report = py.detach(|| stats::run_battery(stream, alpha, &BatteryConfig::default()));
    Ok(PyReport(report.py_err()?))
}

#[pymodule]
#[pyo3(name = "zigzag_trng")]
fn zigzag_trng_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyBitStream>()?;
    m.add_class::<PyMarkov>()?;
    m.add_class::<PyReport>()?;
    m.add("OrbitEscapeError", m.py().get_type::<OrbitEscapeError>())?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(varied_maps, m)?)?;
    m.add_function(wrap_pyfunction!(warmup_discard, m)?)?;
    m.add_function(wrap_pyfunction!(choose_l, m)?)?;
    m.add_function(wrap_pyfunction!(xor_debias, m)?)?;
    m.add_function(wrap_pyfunction!(von_neumann, m)?)?;
    m.add_function(wrap_pyfunction!(postprocess_auto, m)?)?;
    m.add_function(wrap_pyfunction!(autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(run_battery, m)?)?;
    Ok(())
}
