//! Python bindings for the `qfock` core crate.
//!
//! Letters are 0-based here as in the core crate; reports come back as dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qfock::op::{self, Side};
use qfock::{asymptotic, gauge, verify, FockError, GradedOperator};

fn err(e: FockError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn side(name: &str) -> PyResult<Side> {
    match name {
        "left" | "L" => Ok(Side::Left),
        "right" | "R" => Ok(Side::Right),
        other => Err(PyValueError::new_err(format!(
            "side must be 'left' or 'right', got '{other}'"
        ))),
    }
}

#[pyclass(name = "FockContext", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyContext(qfock::FockContext);

#[pymethods]
impl PyContext {
    #[new]
    #[pyo3(signature = (n, q, levels, tol_exact = None, tol_spectral = None))]
    fn new(
        n: usize,
        q: f64,
        levels: usize,
        tol_exact: Option<f64>,
        tol_spectral: Option<f64>,
    ) -> PyResult<Self> {
        let mut ctx = qfock::FockContext::new(n, q, levels).map_err(err)?;
        if tol_exact.is_some() || tol_spectral.is_some() {
            let te = tol_exact.unwrap_or(ctx.tol_exact());
            let ts = tol_spectral.unwrap_or(ctx.tol_spectral());
            ctx = ctx.with_tolerances(te, ts).map_err(err)?;
        }
        Ok(PyContext(ctx))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.0.q()
    }

    #[getter]
    fn levels(&self) -> usize {
        self.0.levels()
    }

    fn dim(&self, k: usize) -> usize {
        self.0.dim(k)
    }

    fn total_dim(&self) -> usize {
        self.0.total_dim()
    }

    fn __repr__(&self) -> String {
        format!(
            "FockContext(n={}, q={}, levels={})",
            self.0.n(),
            self.0.q(),
            self.0.levels()
        )
    }
}

#[pyclass(name = "GramFamily", frozen, skip_from_py_object)]
struct PyGram(qfock::GramFamily);

#[pymethods]
impl PyGram {
    #[new]
    fn new(ctx: &PyContext) -> PyResult<Self> {
        Ok(PyGram(qfock::GramFamily::build(&ctx.0).map_err(err)?))
    }

    #[getter]
    fn ctx(&self) -> PyContext {
        PyContext(self.0.ctx().clone())
    }

    /// `G_k` as a list of rows.
    fn gram(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        self.0.ctx().check_level(k).map_err(err)?;
        let g = self.0.gram(k);
        Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn min_eigs(&self) -> Vec<f64> {
        self.0.min_eigs()
    }

    fn condition(&self, k: usize) -> PyResult<f64> {
        self.0.ctx().check_level(k).map_err(err)?;
        Ok(self.0.level(k).condition())
    }

    fn warnings(&self) -> Vec<String> {
        self.0.warnings()
    }
}

#[pyclass(name = "Operator", frozen, skip_from_py_object)]
struct PyOperator(GradedOperator);

#[pymethods]
impl PyOperator {
    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    /// Stored block keys `(k_out, k_in)`.
    fn block_keys(&self) -> Vec<(usize, usize)> {
        self.0.block_keys()
    }

    /// Block `(k_out, k_in)` as a list of rows; zeros when not stored.
    fn block(&self, k_out: usize, k_in: usize) -> PyResult<Vec<Vec<f64>>> {
        self.0.ctx().check_level(k_out).map_err(err)?;
        self.0.ctx().check_level(k_in).map_err(err)?;
        let b = self.0.block_or_zero(k_out, k_in);
        Ok(b.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn degree(&self) -> Option<i64> {
        self.0.degree()
    }

    fn compose(&self, other: &PyOperator) -> PyResult<PyOperator> {
        Ok(PyOperator(self.0.compose(&other.0).map_err(err)?))
    }

    fn __matmul__(&self, other: &PyOperator) -> PyResult<PyOperator> {
        self.compose(other)
    }

    fn __add__(&self, other: &PyOperator) -> PyResult<PyOperator> {
        Ok(PyOperator(self.0.add(&other.0).map_err(err)?))
    }

    fn __sub__(&self, other: &PyOperator) -> PyResult<PyOperator> {
        Ok(PyOperator(self.0.sub(&other.0).map_err(err)?))
    }

    fn __mul__(&self, c: f64) -> PyOperator {
        PyOperator(self.0.scale(c))
    }

    fn __rmul__(&self, c: f64) -> PyOperator {
        PyOperator(self.0.scale(c))
    }

    fn commutator(&self, other: &PyOperator) -> PyResult<PyOperator> {
        Ok(PyOperator(self.0.commutator(&other.0).map_err(err)?))
    }

    fn q_adjoint(&self, gram: &PyGram) -> PyResult<PyOperator> {
        Ok(PyOperator(self.0.q_adjoint(&gram.0).map_err(err)?))
    }

    /// q-operator norm restricted to input levels `lo..=hi` (default: all levels).
    #[pyo3(signature = (gram, lo = 0, hi = None))]
    fn norm(&self, gram: &PyGram, lo: usize, hi: Option<usize>) -> PyResult<f64> {
        let hi = hi.unwrap_or(self.0.ctx().levels());
        self.0.operator_norm(&gram.0, lo, hi).map_err(err)
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Operator('{}', blocks={})",
            self.0.label(),
            self.0.block_keys().len()
        )
    }
}

#[pyfunction]
fn identity(ctx: &PyContext) -> PyOperator {
    PyOperator(GradedOperator::identity(&ctx.0))
}

#[pyfunction]
fn creation_left(ctx: &PyContext, i: usize) -> PyResult<PyOperator> {
    Ok(PyOperator(op::build_creation_left(&ctx.0, i).map_err(err)?))
}

#[pyfunction]
fn creation_right(ctx: &PyContext, i: usize) -> PyResult<PyOperator> {
    Ok(PyOperator(
        op::build_creation_right(&ctx.0, i).map_err(err)?,
    ))
}

#[pyfunction]
fn reverse(ctx: &PyContext) -> PyOperator {
    PyOperator(op::build_reverse(&ctx.0))
}

#[pyfunction]
fn reverse_middle(ctx: &PyContext, k: usize) -> PyOperator {
    PyOperator(op::build_reverse_middle(&ctx.0, k))
}

#[pyfunction]
fn vacuum_projection(ctx: &PyContext) -> PyOperator {
    PyOperator(op::build_vacuum_projection(&ctx.0))
}

#[pyfunction]
#[pyo3(signature = (gram, side = "left"))]
fn particle_number(gram: &PyGram, side: &str) -> PyResult<PyOperator> {
    Ok(PyOperator(
        op::build_particle_number(&gram.0, self::side(side)?).map_err(err)?,
    ))
}

#[pyfunction]
fn level_spectrum(x: &PyOperator, gram: &PyGram, level: usize) -> PyResult<Vec<f64>> {
    op::level_spectrum(&x.0, &gram.0, level).map_err(err)
}

/// All relation checks as a list of report dicts.
#[pyfunction]
fn relations_suite<'py>(py: Python<'py>, gram: &PyGram) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let reports = verify::relations_suite(&gram.0).map_err(err)?;
    reports
        .iter()
        .map(|r| json_to_py(py, &r.to_json()))
        .collect()
}

#[pyfunction]
fn verify_qccr<'py>(py: Python<'py>, gram: &PyGram) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &verify::verify_qccr(&gram.0).map_err(err)?.to_json())
}

#[pyfunction]
fn verify_spectral_gap<'py>(py: Python<'py>, gram: &PyGram) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(
        py,
        &verify::verify_spectral_gap(&gram.0).map_err(err)?.to_json(),
    )
}

#[pyfunction]
#[pyo3(signature = (gram, k_max, i = 0, j = 0))]
fn commutator_decay<'py>(
    py: Python<'py>,
    gram: &PyGram,
    k_max: usize,
    i: usize,
    j: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let s = asymptotic::measure_commutator_decay(&gram.0, i, j, k_max).map_err(err)?;
    json_to_py(py, &s.to_json())
}

#[pyfunction]
fn flip_defect<'py>(py: Python<'py>, gram: &PyGram, k_max: usize) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(
        py,
        &asymptotic::measure_flip_defect(&gram.0, k_max)
            .map_err(err)?
            .to_json(),
    )
}

#[pyfunction]
fn a_k_check<'py>(py: Python<'py>, gram: &PyGram, k: usize) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(
        py,
        &asymptotic::build_ak_and_verify(&gram.0, k)
            .map_err(err)?
            .to_json(),
    )
}

#[pyfunction]
#[pyo3(signature = (trials = 1000, max_dim = 20, seed = 42))]
fn halfpower<'py>(
    py: Python<'py>,
    trials: usize,
    max_dim: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(
        py,
        &asymptotic::verify_halfpower_inequality(trials, max_dim, seed)
            .map_err(err)?
            .to_json(),
    )
}

/// Range check and defect profile of the isometries `s_i`.
#[pyfunction]
fn isometries<'py>(py: Python<'py>, gram: &PyGram) -> PyResult<Bound<'py, PyDict>> {
    let iso = gauge::build_isometries(&gram.0).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("range", json_to_py(py, &iso.range.to_json())?)?;
    let profile = PyDict::new(py);
    for (&(i, j, m), &v) in &iso.defect_profile {
        profile.set_item((i, j, m), v)?;
    }
    out.set_item("defect_profile", profile)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (gram, k = 0, terms = 40))]
fn telescoping<'py>(
    py: Python<'py>,
    gram: &PyGram,
    k: usize,
    terms: usize,
) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(
        py,
        &gauge::telescoping_recovery(&gram.0, k, terms)
            .map_err(err)?
            .to_json(),
    )
}

#[pymodule]
pub fn pyqfock(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyContext>()?;
    m.add_class::<PyGram>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(identity, m)?)?;
    m.add_function(wrap_pyfunction!(creation_left, m)?)?;
    m.add_function(wrap_pyfunction!(creation_right, m)?)?;
    m.add_function(wrap_pyfunction!(reverse, m)?)?;
    m.add_function(wrap_pyfunction!(reverse_middle, m)?)?;
    m.add_function(wrap_pyfunction!(vacuum_projection, m)?)?;
    m.add_function(wrap_pyfunction!(particle_number, m)?)?;
    m.add_function(wrap_pyfunction!(level_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(relations_suite, m)?)?;
    m.add_function(wrap_pyfunction!(verify_qccr, m)?)?;
    m.add_function(wrap_pyfunction!(verify_spectral_gap, m)?)?;
    m.add_function(wrap_pyfunction!(commutator_decay, m)?)?;
    m.add_function(wrap_pyfunction!(flip_defect, m)?)?;
    m.add_function(wrap_pyfunction!(a_k_check, m)?)?;
    m.add_function(wrap_pyfunction!(halfpower, m)?)?;
    m.add_function(wrap_pyfunction!(isometries, m)?)?;
    m.add_function(wrap_pyfunction!(telescoping, m)?)?;
    Ok(())
}
