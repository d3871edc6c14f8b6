//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers; reports come back as dictionaries with the same fields as the
//! JSON reports of the command-line tool.

use num_complex::Complex64;
use poptlab_core::bell::{chsh_from_table, optimize_chsh as core_optimize_chsh, pr_box_table};
use poptlab_core::dilation::{naimark_dilate, stinespring_dilate as core_stinespring, Povm};
use poptlab_core::fixtures::{self, generate as core_generate, GeneratorKind, GeneratorSpec};
use poptlab_core::jordan::{classify as core_classify, map_from_state, ClassifyConfig};
use poptlab_core::measures::{
    check_no_disturbance, check_no_signalling, check_popt as core_check_popt, gleason_extend as core_gleason,
    OperatorMeasure, PoptOptions, ProductMeasure, ReconstructionOptions, SamplePlan,
};
use poptlab_core::operator::{
    eig_hermitian, partial_transpose_hermitian, ComplexMatrix, HermitianOperator, MatrixJson, Projection, Subsystem,
    HERM_TOL,
};
use poptlab_core::Error;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(poptlab, PoptlabError, PyException);

type Rows = Vec<Vec<Complex64>>;

fn err(e: Error) -> PyErr {
    PoptlabError::new_err(e.to_string())
}

fn matrix_from_rows(rows: Rows) -> PyResult<ComplexMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(err(Error::Dimension("rows have different lengths".into())));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    ComplexMatrix::try_from(MatrixJson {
        dims: [r, c],
        re: flat.iter().map(|z| z.re).collect(),
        im: flat.iter().map(|z| z.im).collect(),
    })
    .map_err(err)
}

fn rows_of(m: &ComplexMatrix) -> Rows {
    let j = MatrixJson::from(m.clone());
    let [_, c] = j.dims;
    j.re.iter()
        .zip(&j.im)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect::<Vec<_>>()
        .chunks(c)
        .map(<[Complex64]>::to_vec)
        .collect()
}

fn projection(rows: Rows) -> PyResult<Projection> {
    let h = HermitianOperator::new(matrix_from_rows(rows)?, HERM_TOL).map_err(err)?;
    Projection::new(h, 1e-9).map_err(err)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PoptlabError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn side(name: &str) -> PyResult<Subsystem> {
    match name {
        "first" | "left" => Ok(Subsystem::First),
        "second" | "right" => Ok(Subsystem::Second),
        other => Err(err(Error::InvalidInput(format!("unknown side {other:?}")))),
    }
}

/// Hermitian operator on a finite-dimensional space.
#[pyclass(name = "Operator", frozen, module = "poptlab", skip_from_py_object)]
#[derive(Clone)]
pub struct PyOperator {
    inner: HermitianOperator,
}

#[pymethods]
impl PyOperator {
    #[new]
    #[pyo3(signature = (rows, tol = HERM_TOL))]
    fn new(rows: Rows, tol: f64) -> PyResult<Self> {
        let inner = HermitianOperator::new(matrix_from_rows(rows)?, tol).map_err(err)?;
        Ok(PyOperator { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(s).map_err(|e| PoptlabError::new_err(e.to_string()))?;
        Ok(PyOperator { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PoptlabError::new_err(e.to_string()))
    }

    fn rows(&self) -> Rows {
        rows_of(self.inner.matrix())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Eigenvalues in descending order.
    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        Ok(eig_hermitian(&self.inner).map_err(err)?.eigenvalues)
    }

    fn scale(&self, s: f64) -> Self {
        PyOperator {
            inner: self.inner.scale(s),
        }
    }

    #[pyo3(signature = (d1, d2, side = "first"))]
    fn partial_transpose(&self, d1: usize, d2: usize, side: &str) -> PyResult<Self> {
        let inner = partial_transpose_hermitian(&self.inner, (d1, d2), self::side(side)?).map_err(err)?;
        Ok(PyOperator { inner })
    }

    fn __repr__(&self) -> String {
        format!("Operator(dim={}, trace={:.6})", self.inner.dim(), self.inner.trace())
    }
}

/// Product measure, backed by an operator or by a finite table.
#[pyclass(name = "Measure", frozen, module = "poptlab")]
pub struct PyMeasure {
    inner: ProductMeasure,
}

#[pymethods]
impl PyMeasure {
    #[staticmethod]
    fn from_operator(op: &PyOperator, d1: usize, d2: usize) -> PyResult<Self> {
        let m = OperatorMeasure::new(op.inner.clone(), (d1, d2)).map_err(err)?;
        Ok(PyMeasure {
            inner: ProductMeasure::OperatorBacked(m),
        })
    }

    /// Parses a state document or a table document.
    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(s).map_err(|e| PoptlabError::new_err(e.to_string()))?;
        Ok(PyMeasure { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PoptlabError::new_err(e.to_string()))
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    #[getter]
    fn is_tabulated(&self) -> bool {
        matches!(self.inner, ProductMeasure::Tabulated(_))
    }

    /// `μ(q₁, q₂)` for projections given as nested lists.
    fn eval(&self, q1: Rows, q2: Rows) -> PyResult<f64> {
        self.inner.eval(&projection(q1)?, &projection(q2)?).map_err(err)
    }

    #[pyo3(signature = (contexts = 200, seed = 0, tol = 1e-9))]
    fn check_no_signalling<'py>(
        &self,
        py: Python<'py>,
        contexts: usize,
        seed: u64,
        tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let plan = SamplePlan {
            contexts,
            seed,
            structured: true,
        };
        to_py(py, &check_no_signalling(&self.inner, &plan, tol).map_err(err)?)
    }

    #[pyo3(signature = (contexts = 200, seed = 0, tol = 1e-9))]
    fn check_no_disturbance<'py>(
        &self,
        py: Python<'py>,
        contexts: usize,
        seed: u64,
        tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let plan = SamplePlan {
            contexts,
            seed,
            structured: true,
        };
        to_py(py, &check_no_disturbance(&self.inner, &plan, tol).map_err(err)?)
    }

    /// Reconstructed operator and the residual of the solve.
    #[pyo3(signature = (allow_qubit = false))]
    fn gleason_extend(&self, allow_qubit: bool) -> PyResult<(PyOperator, f64)> {
        let opts = ReconstructionOptions {
            allow_qubit,
            ..Default::default()
        };
        let r = self.inner.gleason_extend(&opts).map_err(err)?;
        Ok((PyOperator { inner: r.rho }, r.residual))
    }

    fn chsh(&self) -> PyResult<f64> {
        match &self.inner {
            ProductMeasure::Tabulated(t) => chsh_from_table(t).map_err(err),
            ProductMeasure::OperatorBacked(_) => Err(err(Error::InvalidInput(
                "use optimize_chsh for operator-backed measures".into(),
            ))),
        }
    }

    fn __repr__(&self) -> String {
        let kind = if self.is_tabulated() { "tabulated" } else { "operator" };
        format!("Measure({kind}, dims={:?})", self.inner.dims())
    }
}

/// Positive operator-valued measure, possibly of sub-unit total weight.
#[pyclass(name = "Povm", frozen, module = "poptlab")]
pub struct PyPovm {
    inner: Povm,
}

#[pymethods]
impl PyPovm {
    #[new]
    fn new(elements: Vec<Rows>) -> PyResult<Self> {
        let elements = elements
            .into_iter()
            .map(|rows| HermitianOperator::new(matrix_from_rows(rows)?, HERM_TOL).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(PyPovm {
            inner: Povm::new(elements).map_err(err)?,
        })
    }

    #[staticmethod]
    fn trine() -> Self {
        PyPovm {
            inner: fixtures::trine_povm(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Naimark dilation report.
    fn dilate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &naimark_dilate(&self.inner).map_err(err)?)
    }
}

#[pyfunction]
#[pyo3(signature = (op, d1, d2, restarts = 64, samples = 50, seed = 0, tol_eig = 1e-9, tol_popt = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn classify<'py>(
    py: Python<'py>,
    op: &PyOperator,
    d1: usize,
    d2: usize,
    restarts: usize,
    samples: usize,
    seed: u64,
    tol_eig: f64,
    tol_popt: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ClassifyConfig {
        eig_tol: tol_eig,
        popt: PoptOptions {
            restarts,
            seed,
            tol: tol_popt,
            ..Default::default()
        },
        samples,
        seed,
        ..Default::default()
    };
    let report = py
        .detach(|| core_classify(op.inner.matrix(), (d1, d2), &cfg))
        .map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (op, d1, d2, restarts = 64, seed = 0, tol = 1e-8))]
fn check_popt<'py>(
    py: Python<'py>,
    op: &PyOperator,
    d1: usize,
    d2: usize,
    restarts: usize,
    seed: u64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = PoptOptions {
        restarts,
        seed,
        tol,
        ..Default::default()
    };
    let cert = py.detach(|| core_check_popt(&op.inner, (d1, d2), &opts)).map_err(err)?;
    to_py(py, &cert)
}

#[pyfunction]
#[pyo3(signature = (op, d1, d2, restarts = 16, seed = 0))]
fn optimize_chsh<'py>(
    py: Python<'py>,
    op: &PyOperator,
    d1: usize,
    d2: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let opt = py
        .detach(|| core_optimize_chsh(&op.inner, (d1, d2), restarts, seed))
        .map_err(err)?;
    to_py(py, &opt)
}

/// Stinespring lift of `a ↦ φ_μ(aᵀ)` for the measure of a state.
#[pyfunction]
fn stinespring_dilate<'py>(py: Python<'py>, op: &PyOperator, d1: usize, d2: usize) -> PyResult<Bound<'py, PyAny>> {
    let phi = map_from_state(&op.inner, (d1, d2)).map_err(err)?;
    to_py(py, &core_stinespring(&phi.compose_transpose(), true).map_err(err)?)
}

/// Reconstructs the operator behind `oracle(q1, q2) -> float`, where the
/// arguments are projections as nested lists.
#[pyfunction]
#[pyo3(signature = (oracle, d1, d2, allow_qubit = false))]
fn gleason_extend(oracle: &Bound<'_, PyAny>, d1: usize, d2: usize, allow_qubit: bool) -> PyResult<(PyOperator, f64)> {
    let mut py_err = None;
    let opts = ReconstructionOptions {
        allow_qubit,
        ..Default::default()
    };
    let result = core_gleason(
        |q1, q2| {
            let call = oracle
                .call1((rows_of(q1.matrix()), rows_of(q2.matrix())))
                .and_then(|v| v.extract::<f64>());
            call.map_err(|e| {
                let msg = e.to_string();
                py_err = Some(e);
                Error::InvalidInput(format!("oracle raised: {msg}"))
            })
        },
        (d1, d2),
        &opts,
    );
    if let Some(e) = py_err {
        return Err(e);
    }
    let r = result.map_err(err)?;
    Ok((PyOperator { inner: r.rho }, r.residual))
}

#[pyfunction]
#[pyo3(signature = (kind, d1, d2 = None, seed = 0))]
fn generate<'py>(py: Python<'py>, kind: &str, d1: usize, d2: Option<usize>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let kind: GeneratorKind = kind.parse().map_err(err)?;
    let g = core_generate(&GeneratorSpec::new(kind, (d1, d2.unwrap_or(d1)), seed)).map_err(err)?;
    to_py(py, &g)
}

/// `SWAP` on `ℂ^d ⊗ ℂ^d`, trace `d`.
#[pyfunction]
fn swap_operator(d: usize) -> PyOperator {
    PyOperator {
        inner: fixtures::swap_operator(d),
    }
}

#[pyfunction]
fn max_entangled(d: usize) -> PyOperator {
    PyOperator {
        inner: fixtures::max_entangled(d),
    }
}

#[pyfunction]
fn werner(d: usize, p: f64) -> PyResult<PyOperator> {
    Ok(PyOperator {
        inner: fixtures::werner(d, p).map_err(err)?,
    })
}

#[pyfunction]
fn pr_box() -> PyMeasure {
    PyMeasure {
        inner: ProductMeasure::Tabulated(pr_box_table()),
    }
}

#[pymodule]
fn poptlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PoptlabError", m.py().get_type::<PoptlabError>())?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyPovm>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(check_popt, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_chsh, m)?)?;
    m.add_function(wrap_pyfunction!(stinespring_dilate, m)?)?;
    m.add_function(wrap_pyfunction!(gleason_extend, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(swap_operator, m)?)?;
    m.add_function(wrap_pyfunction!(max_entangled, m)?)?;
    m.add_function(wrap_pyfunction!(werner, m)?)?;
    m.add_function(wrap_pyfunction!(pr_box, m)?)?;
    Ok(())
}
