//! Python bindings for `qtpd-core`.
//!
//! Matrices cross the boundary as nested lists of `complex` (anything
//! supporting `__complex__` is accepted, so NumPy arrays work too). Splits are
//! `(n_a, n_b)` tuples. Every result type also has `to_json()` giving the same
//! encoding the CLI writes.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qtpd_core::qtpd::{ChoiReducedState, ExtractedFactors, Shots, SnapshotMode};
use qtpd_core::tpd::TensorProductDecomposition;
use qtpd_core::{analysis, experiments, io, qtpd as pipeline, rng, tpd, BipartiteSplit, CMatrix, Error, C64};

create_exception!(qtpd, NumericalError, PyRuntimeError, "The numerics failed on otherwise valid input.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e if e.is_numerical() => NumericalError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for qtpd_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

type Rows = Vec<Vec<C64>>;

fn matrix(rows: Rows) -> PyResult<CMatrix> {
    CMatrix::from_rows(&rows).py()
}

fn rows(m: &CMatrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn split((n_a, n_b): (usize, usize)) -> PyResult<BipartiteSplit> {
    BipartiteSplit::new(n_a, n_b).py()
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `U = Σ_k s_k A_k ⊗ B_k` with `Tr A_k† A_l = d_A δ_kl` and likewise for `B`.
#[pyclass(name = "TensorProductDecomposition", module = "qtpd", frozen)]
struct PyTpd(TensorProductDecomposition);

#[pymethods]
impl PyTpd {
    #[getter]
    fn s(&self) -> Vec<f64> {
        self.0.s.clone()
    }

    #[getter]
    fn a_ops(&self) -> Vec<Rows> {
        self.0.a_ops.iter().map(rows).collect()
    }

    #[getter]
    fn b_ops(&self) -> Vec<Rows> {
        self.0.b_ops.iter().map(rows).collect()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    fn reconstruct(&self) -> Rows {
        rows(&tpd::reconstruct(&self.0))
    }

    /// `‖U − U_r‖_F / √D` for the best rank-`r` approximation.
    fn low_rank_error(&self, r: usize) -> PyResult<f64> {
        tpd::low_rank_error(&self.0, r).py()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("TensorProductDecomposition(rank={}, s={:?})", self.0.rank(), self.0.s)
    }
}

/// Snapshot of the Choi marginal on the A side.
#[pyclass(name = "ChoiSnapshot", module = "qtpd", frozen)]
struct PySnapshot(ChoiReducedState);

#[pymethods]
impl PySnapshot {
    #[getter]
    fn rho(&self) -> Rows {
        rows(&self.0.rho)
    }

    #[getter]
    fn error_estimate(&self) -> f64 {
        self.0.error_estimate
    }

    /// `None` for exact snapshots.
    #[getter]
    fn shots(&self) -> Option<u64> {
        self.0.provenance.shots()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0)
    }
}

/// Coefficients `s_k` and A-side operators read off a snapshot.
#[pyclass(name = "ExtractedFactors", module = "qtpd", frozen)]
struct PyFactors(ExtractedFactors);

#[pymethods]
impl PyFactors {
    #[getter]
    fn s(&self) -> Vec<f64> {
        self.0.s.clone()
    }

    #[getter]
    fn a_ops(&self) -> Vec<Rows> {
        self.0.a_ops.iter().map(rows).collect()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.0.threshold
    }

    #[getter]
    fn dropped(&self) -> Vec<f64> {
        self.0.dropped.clone()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("ExtractedFactors(rank={}, s={:?})", self.0.rank(), self.0.s)
    }
}

#[pyfunction]
fn classical_tpd(u: Rows, split: (usize, usize)) -> PyResult<PyTpd> {
    Ok(PyTpd(tpd::classical_tpd(&matrix(u)?, self::split(split)?).py()?))
}

/// Snapshot and factors for `mode` in `exact`, `choi-exact`,
/// `choi-tomographic` or `sequential`.
#[pyfunction]
#[pyo3(name = "qtpd", signature = (u, split, mode = "choi-exact", shots = None, seed = None, threshold = None))]
fn run_qtpd(
    py: Python<'_>,
    u: Rows,
    split: (usize, usize),
    mode: &str,
    shots: Option<u64>,
    seed: Option<u64>,
    threshold: Option<f64>,
) -> PyResult<(PySnapshot, PyFactors)> {
    let seed = seed.unwrap_or_else(rng::default_seed);
    if shots == Some(0) {
        return Err(PyValueError::new_err("shots must be positive"));
    }
    let mode = match mode {
        "exact" | "choi-exact" => SnapshotMode::Exact,
        "choi-tomographic" => {
            let n = shots.ok_or_else(|| PyValueError::new_err("choi-tomographic needs shots"))?;
            SnapshotMode::Tomographic { shots: Shots::Finite(n), seed }
        }
        "sequential" => SnapshotMode::Sequential { shots: shots.map_or(Shots::Infinite, Shots::Finite), seed },
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let (u, split) = (matrix(u)?, self::split(split)?);
    let (snap, factors) = py.detach(|| pipeline::run_pipeline(&u, split, mode, threshold)).py()?;
    Ok((PySnapshot(snap), PyFactors(factors)))
}

/// `(probability, state)` per factor for the B-side input `state`; `state` is
/// `None` for branches that cannot occur.
#[pyfunction]
fn distill(u: Rows, factors: &PyFactors, state: &str) -> PyResult<Vec<(f64, Option<Vec<C64>>)>> {
    let psi = io::parse_product_state(state).py()?;
    let result = pipeline::distill(&matrix(u)?, &factors.0, &psi).py()?;
    Ok(result.branches.into_iter().map(|b| (b.probability, b.state)).collect())
}

/// `−Σ s_k² ln s_k²`.
#[pyfunction]
fn nonlocality(s: Vec<f64>) -> PyResult<f64> {
    analysis::nonlocality(&s).py()
}

#[pyfunction]
fn entangling_power_swap(u: Rows, split: (usize, usize)) -> PyResult<f64> {
    analysis::entangling_power_swap(&matrix(u)?, self::split(split)?).py()
}

/// Eigenphase witness `(φ, ψ)` if a basis change makes `u` a product, else `None`.
#[pyfunction]
#[pyo3(signature = (u, split, tol = 1e-8))]
fn decoherence_free_check(u: Rows, split: (usize, usize), tol: f64) -> PyResult<Option<(Vec<f64>, Vec<f64>)>> {
    Ok(analysis::decoherence_free_check(&matrix(u)?, self::split(split)?, tol).py()?.phases)
}

/// Amplitudes of a product state such as `"01+"`.
#[pyfunction]
fn product_state(spec: &str) -> PyResult<Vec<C64>> {
    io::parse_product_state(spec).py()
}

/// Two-qubit Heisenberg closed forms as a JSON object.
#[pyfunction]
fn analytic_two_qubit(jx: f64, jy: f64, jz: f64, t: f64) -> PyResult<String> {
    to_json(&experiments::analytic_two_qubit(jx, jy, jz, t))
}

/// Runs a sweep config given as JSON text and returns the CSV.
#[pyfunction]
fn run_sweep(py: Python<'_>, config: &str) -> PyResult<String> {
    let config = experiments::ExperimentConfig::from_json(config).py()?;
    Ok(py.detach(|| experiments::run_sweep(&config)).py()?.1)
}

#[pymodule(name = "qtpd")]
pub fn qtpd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyTpd>()?;
    m.add_class::<PySnapshot>()?;
    m.add_class::<PyFactors>()?;
    m.add_function(wrap_pyfunction!(classical_tpd, m)?)?;
    m.add_function(wrap_pyfunction!(run_qtpd, m)?)?;
    m.add_function(wrap_pyfunction!(distill, m)?)?;
    m.add_function(wrap_pyfunction!(nonlocality, m)?)?;
    m.add_function(wrap_pyfunction!(entangling_power_swap, m)?)?;
    m.add_function(wrap_pyfunction!(decoherence_free_check, m)?)?;
    m.add_function(wrap_pyfunction!(product_state, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_two_qubit, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
