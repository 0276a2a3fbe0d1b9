//! Python bindings: N-functions, fields, the two operators, Orlicz norms,
//! the second-order modulus and the experiment drivers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use simplex_orlicz::domain::{Point, QuadratureSpec, ScalarField, SmoothnessHint};
use simplex_orlicz::harness::{self, ExperimentConfig};
use simplex_orlicz::nfunctions::{check_delta2, Delta2Grid};
use simplex_orlicz::operators::{OperatorSpec, TruncationPolicy};
use simplex_orlicz::smoothness::{full_modulus2, SteklovField, DEFAULT_DIRECTIONS, DEFAULT_KERNEL_ORDER, DEFAULT_T_SAMPLES};
use simplex_orlicz::{orlicz, Error};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// An N-function, built from a registry key such as `"power:p=2"`.
#[pyclass(name = "NFunction", module = "pyorlicz", frozen)]
struct PyNFunction {
    inner: simplex_orlicz::NFunction,
}

#[pymethods]
impl PyNFunction {
    #[new]
    fn new(key: &str) -> PyResult<Self> {
        simplex_orlicz::NFunction::from_key(key).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn power(p: f64) -> PyResult<Self> {
        simplex_orlicz::NFunction::power(p).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn power_log(p: f64) -> PyResult<Self> {
        simplex_orlicz::NFunction::power_log(p).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn exp_minus() -> Self {
        Self { inner: simplex_orlicz::NFunction::exp_minus() }
    }

    #[getter]
    fn key(&self) -> String {
        self.inner.key().to_string()
    }

    fn __call__(&self, u: f64) -> f64 {
        self.inner.phi(u)
    }

    fn phi(&self, u: f64) -> f64 {
        self.inner.phi(u)
    }

    /// `Ψ(v) = sup_u (u v - Φ(u))`.
    fn complement(&self, v: f64) -> PyResult<f64> {
        self.inner.complement(v).map_err(py_err)
    }

    /// Numeric Δ₂ scan of `Φ(2u)/Φ(u)` on `[u0, 1e4 u0]`.
    #[pyo3(signature = (u0 = 1.0))]
    fn delta2<'py>(&self, py: Python<'py>, u0: f64) -> PyResult<Bound<'py, PyAny>> {
        let report = check_delta2(&self.inner, u0, &Delta2Grid::default_for(u0)).map_err(py_err)?;
        to_py_json(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("NFunction('{}')", self.inner.key())
    }
}

/// A field on the simplex: a builtin key or any Python callable `f(x1, x2)`.
#[pyclass(name = "Field", module = "pyorlicz", frozen)]
struct PyField {
    inner: ScalarField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(key: &str) -> PyResult<Self> {
        ScalarField::builtin(key).map(|inner| Self { inner }).map_err(py_err)
    }

    /// Wraps a callable. Exceptions inside it evaluate to NaN.
    #[staticmethod]
    #[pyo3(signature = (func, label = "python"))]
    fn from_callable(func: Py<PyAny>, label: &str) -> Self {
        let inner = ScalarField::new(label, SmoothnessHint::Rough, move |x: Point| {
            Python::attach(|py| {
                func.call1(py, (x.x1, x.x2))
                    .and_then(|v| v.extract::<f64>(py))
                    .unwrap_or(f64::NAN)
            })
        });
        Self { inner }
    }

    #[staticmethod]
    fn constant(c: f64) -> Self {
        Self { inner: ScalarField::constant(c) }
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __call__(&self, x1: f64, x2: f64) -> f64 {
        self.inner.eval(Point::new(x1, x2))
    }

    /// Value of the reflected, periodized extension at any point of the plane.
    fn extend(&self, y1: f64, y2: f64) -> f64 {
        self.inner.extend_eval(Point::new(y1, y2))
    }

    fn __repr__(&self) -> String {
        format!("Field('{}')", self.inner.label())
    }
}

/// `mkz(n)` or `stancu(n, s)`.
#[pyclass(name = "Operator", module = "pyorlicz", frozen)]
struct PyOperator {
    spec: OperatorSpec,
}

#[pymethods]
impl PyOperator {
    #[staticmethod]
    #[pyo3(signature = (n, tail_eps = None, cell_order = None))]
    fn mkz(n: u32, tail_eps: Option<f64>, cell_order: Option<usize>) -> PyResult<Self> {
        let mut spec = OperatorSpec::mkz(n);
        if let Some(eps) = tail_eps {
            spec = spec.with_truncation(TruncationPolicy { tail_eps: eps, ..spec.truncation });
        }
        if let Some(order) = cell_order {
            spec = spec.with_cell_order(order);
        }
        spec.validate().map_err(py_err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    #[pyo3(signature = (n, s = 0, cell_order = None))]
    fn stancu(n: u32, s: u32, cell_order: Option<usize>) -> PyResult<Self> {
        let mut spec = OperatorSpec::stancu(n, s);
        if let Some(order) = cell_order {
            spec = spec.with_cell_order(order);
        }
        spec.validate().map_err(py_err)?;
        Ok(Self { spec })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.spec.kind.as_str()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.spec.n
    }

    #[getter]
    fn s(&self) -> u32 {
        self.spec.s
    }

    /// `(K f)(x)` with the weight mass and term count.
    fn apply<'py>(&self, py: Python<'py>, field: &PyField, x1: f64, x2: f64) -> PyResult<Bound<'py, PyDict>> {
        let f = field.inner.clone();
        let spec = self.spec;
        let r = py.detach(move || spec.apply(&f, Point::new(x1, x2))).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("value", r.value)?;
        d.set_item("weight_mass", r.weight_mass)?;
        d.set_item("terms_used", r.terms_used)?;
        d.set_item("truncated", r.truncated)?;
        Ok(d)
    }

    /// `(K f)(x)` at many points; the field is bound once.
    fn apply_many(&self, py: Python<'_>, field: &PyField, points: Vec<(f64, f64)>) -> PyResult<Vec<f64>> {
        let f = field.inner.clone();
        let spec = self.spec;
        py.detach(move || {
            let op = spec.bind(&f)?;
            points.iter().map(|&(a, b)| op.apply(Point::new(a, b)).map(|r| r.value)).collect::<simplex_orlicz::Result<Vec<f64>>>()
        })
        .map_err(py_err)
    }

    /// `‖K f - f‖_Φ`.
    #[pyo3(signature = (phi, field, quad_order = 6, quad_levels = 2, rel_tol = 1e-9))]
    fn error_norm(
        &self,
        py: Python<'_>,
        phi: &PyNFunction,
        field: &PyField,
        quad_order: usize,
        quad_levels: usize,
        rel_tol: f64,
    ) -> PyResult<f64> {
        let spec = self.spec;
        let nf = phi.inner.clone();
        let f = field.inner.clone();
        py.detach(move || {
            let q = QuadratureSpec::new(quad_order, quad_levels, rel_tol)?;
            let op = spec.bind(&f)?;
            orlicz::orlicz_norm(&nf, &op.residual(), &q).map(|r| r.value)
        })
        .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        match self.spec.kind.as_str() {
            "stancu" => format!("Operator.stancu({}, {})", self.spec.n, self.spec.s),
            _ => format!("Operator.mkz({})", self.spec.n),
        }
    }
}

/// `‖f‖_Φ` with the minimizing scale.
#[pyfunction]
#[pyo3(signature = (phi, field, quad_order = 6, quad_levels = 6, rel_tol = 1e-9))]
fn orlicz_norm<'py>(
    py: Python<'py>,
    phi: &PyNFunction,
    field: &PyField,
    quad_order: usize,
    quad_levels: usize,
    rel_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let nf = phi.inner.clone();
    let f = field.inner.clone();
    let r = py
        .detach(move || {
            let q = QuadratureSpec::new(quad_order, quad_levels, rel_tol)?;
            orlicz::orlicz_norm(&nf, &f, &q)
        })
        .map_err(py_err)?;
    to_py_json(py, &r)
}

/// `Ω²(f, r)_Φ`, the sup over sampled directions and step sizes.
#[pyfunction]
#[pyo3(signature = (phi, field, r, directions = DEFAULT_DIRECTIONS, t_samples = DEFAULT_T_SAMPLES, quad_order = 6, quad_levels = 2, rel_tol = 1e-9))]
#[allow(clippy::too_many_arguments)]
fn modulus<'py>(
    py: Python<'py>,
    phi: &PyNFunction,
    field: &PyField,
    r: f64,
    directions: usize,
    t_samples: usize,
    quad_order: usize,
    quad_levels: usize,
    rel_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let nf = phi.inner.clone();
    let f = field.inner.clone();
    let m = py
        .detach(move || {
            let q = QuadratureSpec::new(quad_order, quad_levels, rel_tol)?;
            full_modulus2(&nf, &f, r, &q, directions, t_samples)
        })
        .map_err(py_err)?;
    to_py_json(py, &m)
}

/// The Steklov mean of `field` at radius `r`, as a new field.
#[pyfunction]
#[pyo3(signature = (field, r, kernel_order = DEFAULT_KERNEL_ORDER))]
fn steklov(field: &PyField, r: f64, kernel_order: usize) -> PyResult<PyField> {
    let sf = SteklovField::new(field.inner.clone(), r, kernel_order).map_err(py_err)?;
    Ok(PyField { inner: sf.to_field() })
}

fn config_from(text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::parse(text).map_err(py_err)
}

/// Runs the lemma checks for a flat `key = value` config.
#[pyfunction]
#[pyo3(signature = (config = ""))]
fn verify_lemmas<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config)?;
    let report = py.detach(move || harness::run_verify_lemmas(&cfg)).map_err(py_err)?;
    let out = to_py_json(py, &report)?;
    out.set_item("passed", report.all_passed())?;
    Ok(out)
}

/// Runs a convergence experiment; returns records, fits, checks and the CSV text.
#[pyfunction]
#[pyo3(signature = (config = ""))]
fn converge<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config_from(config)?;
    let report = py.detach(move || harness::run_convergence(&cfg)).map_err(py_err)?;
    let checks = report.checks();
    let csv = harness::csv_string(&report.records).map_err(py_err)?;
    let out = to_py_json(py, &report)?;
    out.set_item("checks", to_py_json(py, &checks)?)?;
    out.set_item("passed", checks.iter().all(|c| c.passed))?;
    out.set_item("csv", csv)?;
    Ok(out)
}

#[pymodule]
fn pyorlicz(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNFunction>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(orlicz_norm, m)?)?;
    m.add_function(wrap_pyfunction!(modulus, m)?)?;
    m.add_function(wrap_pyfunction!(steklov, m)?)?;
    m.add_function(wrap_pyfunction!(verify_lemmas, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    m.add("CSV_COLUMNS", harness::CSV_COLUMNS.to_vec())?;
    Ok(())
}
