//! Python bindings. Matrices cross the boundary as lists of rows; sets of
//! vectors (W, V, coefficient bases) as lists of vectors.

use focal_core::comparison::{intermediate_ricci_comparison, theorem_a_check, ComparisonConfig};
use focal_core::jacobi::first_focal_both_ways;
use focal_core::scenario::{self, Scenario};
use focal_core::wilking::TransverseSplit;
use focal_core::{
    constant_curvature_model, custom_diagonal_model, linalg, product_space_form_model, radial_ric_k_min, registry,
    riccati_operator, submanifold_lagrangian, trace_restricted, FamilyConfig, GeodesicModel, LagrangianFamily,
    ModelSolution, ProductDirection, ScalarFn, SubmanifoldData,
};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use std::sync::Arc;

type Rows = Vec<Vec<f64>>;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Each inner list becomes one column of an `dim x len` matrix.
fn from_vectors(vectors: &[Vec<f64>], dim: usize) -> PyResult<DMatrix<f64>> {
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(err(format!("vectors must have length {dim}")));
    }
    Ok(DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn json_value(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let s = v.to_string();
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

/// Curvature operator `R(t)` along one geodesic, in a parallel normal frame.
#[pyclass(name = "GeodesicModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: GeodesicModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn constant(n: usize, kappa: f64) -> PyResult<Self> {
        Ok(Self { inner: constant_curvature_model(n, kappa).map_err(err)? })
    }

    /// `S^a_{kappa1} x S^b_{kappa2}` (flat or hyperbolic factors allowed),
    /// geodesic at angle `alpha` from the first factor.
    #[staticmethod]
    #[pyo3(signature = (a, kappa1, b, kappa2, alpha = 0.0))]
    fn product(a: usize, kappa1: f64, b: usize, kappa2: f64, alpha: f64) -> PyResult<Self> {
        let dir = ProductDirection::new(alpha).map_err(err)?;
        Ok(Self { inner: product_space_form_model(a, kappa1, b, kappa2, dir).map_err(err)? })
    }

    /// Diagonal `R(t)` with entries `base + amplitude sin(frequency t + phase)`.
    #[staticmethod]
    #[pyo3(signature = (base, amplitude = None, frequency = None, phase = None))]
    fn diagonal(
        base: Vec<f64>,
        amplitude: Option<Vec<f64>>,
        frequency: Option<Vec<f64>>,
        phase: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let m = base.len();
        let amp = amplitude.unwrap_or_else(|| vec![0.0; m]);
        let freq = frequency.unwrap_or_else(|| vec![1.0; m]);
        let ph = phase.unwrap_or_else(|| vec![0.0; m]);
        if amp.len() != m || freq.len() != m || ph.len() != m {
            return Err(err("amplitude, frequency and phase must match base in length"));
        }
        let fns = (0..m)
            .map(|i| {
                let (b, a, f, p) = (base[i], amp[i], freq[i], ph[i]);
                Arc::new(move |t: f64| b + a * (f * t + p).sin()) as ScalarFn
            })
            .collect();
        Ok(Self { inner: custom_diagonal_model(m + 1, fns).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn normal_dim(&self) -> usize {
        self.inner.normal_dim()
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        self.inner.domain()
    }

    fn curvature(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.inner.curvature(t).map_err(err)?))
    }

    fn eigenvalues(&self, t: f64) -> PyResult<Vec<f64>> {
        self.inner.eigenvalues(t).map_err(err)
    }

    fn ric_k_min(&self, t: f64, k: usize) -> PyResult<f64> {
        radial_ric_k_min(&self.inner, t, k).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("GeodesicModel({}, n={})", self.inner.label(), self.inner.n())
    }
}

#[pyclass(name = "Submanifold", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySubmanifold {
    inner: SubmanifoldData,
    indices: Option<Vec<usize>>,
}

#[pymethods]
impl PySubmanifold {
    /// `shape_op` is the `dim x dim` shape operator along the geodesic's
    /// initial direction; `tangent_indices` places `T N` on frame vectors.
    #[new]
    #[pyo3(signature = (dim, shape_op = None, tangent_indices = None))]
    fn new(dim: usize, shape_op: Option<Vec<Vec<f64>>>, tangent_indices: Option<Vec<usize>>) -> PyResult<Self> {
        let s = match shape_op {
            Some(rows) => from_rows(&rows)?,
            None => DMatrix::zeros(dim, dim),
        };
        if s.nrows() != dim || s.ncols() != dim {
            return Err(err(format!("shape_op must be {dim} x {dim}")));
        }
        Ok(Self { inner: SubmanifoldData::new(dim, s), indices: tangent_indices })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.d
    }
}

impl PySubmanifold {
    fn placed(&self, normal_dim: usize) -> PyResult<SubmanifoldData> {
        match &self.indices {
            Some(idx) => self.inner.clone().with_tangent_indices(normal_dim, idx).map_err(err),
            None => Ok(self.inner.clone()),
        }
    }
}

/// A Lagrangian family of normal Jacobi fields, integrated over the model
/// domain on construction.
#[pyclass(name = "LagrangianFamily", frozen)]
struct PyFamily {
    inner: LagrangianFamily,
}

fn config(step: f64) -> PyResult<FamilyConfig> {
    let cfg = FamilyConfig { step, ..FamilyConfig::default() };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pymethods]
impl PyFamily {
    /// Columns of `j0` and `dj0` are the initial values of the basis fields.
    #[new]
    #[pyo3(signature = (model, t0, j0, dj0, step = 1e-3))]
    fn new(model: &PyModel, t0: f64, j0: Vec<Vec<f64>>, dj0: Vec<Vec<f64>>, step: f64) -> PyResult<Self> {
        let fam = LagrangianFamily::new(model.inner.clone(), t0, from_rows(&j0)?, from_rows(&dj0)?, config(step)?);
        Ok(Self { inner: fam.map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (model, submanifold, step = 1e-3))]
    fn from_submanifold(model: &PyModel, submanifold: &PySubmanifold, step: f64) -> PyResult<Self> {
        let sub = submanifold.placed(model.inner.normal_dim())?;
        Ok(Self { inner: submanifold_lagrangian(model.inner.clone(), &sub, config(step)?).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `(J(t), J'(t))` as lists of rows.
    fn integrate(&self, t: f64) -> PyResult<(Rows, Rows)> {
        let (j, dj) = self.inner.integrate(t).map_err(err)?;
        Ok((to_rows(&j), to_rows(&dj)))
    }

    fn symplectic_form(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.inner.symplectic_form(t).map_err(err)?))
    }

    fn is_lagrangian(&self) -> bool {
        self.inner.is_lagrangian()
    }

    /// `[(t, multiplicity), ...]` on `[lo, hi]`.
    fn focal_events(&self, lo: f64, hi: f64) -> PyResult<Vec<(f64, usize)>> {
        let ev = self.inner.focal_events(lo, hi).map_err(err)?;
        Ok(ev.into_iter().map(|e| (e.t, e.multiplicity)).collect())
    }

    fn first_focal_time(&self) -> PyResult<Option<(f64, usize)>> {
        Ok(self.inner.first_focal_time(None).map_err(err)?.map(|e| (e.t, e.multiplicity)))
    }

    /// First focal distance in either direction from `t0`.
    fn focal_radius(&self) -> PyResult<f64> {
        first_focal_both_ways(&self.inner).map_err(err)
    }

    fn count_focal_points(&self, lo: f64, hi: f64) -> PyResult<usize> {
        self.inner.count_focal_points((lo, hi), true).map_err(err)
    }

    fn riccati(&self, t: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&riccati_operator(&self.inner, t).map_err(err)?))
    }

    /// Trace of `S(t)` restricted to the span of the given fields at `t`.
    fn trace_restricted(&self, t: f64, coeffs: Vec<Vec<f64>>) -> PyResult<f64> {
        let c = from_vectors(&coeffs, self.inner.dim())?;
        trace_restricted(&self.inner, t, &c).map_err(err)
    }

    /// Residual of the transverse Jacobi equation and the trace transfer
    /// for the subfamily spanned by the coefficient vectors `v`.
    #[pyo3(signature = (v, t, fd_step = 1e-4))]
    fn transverse(&self, py: Python<'_>, v: Vec<Vec<f64>>, t: f64, fd_step: f64) -> PyResult<Py<PyAny>> {
        let split = TransverseSplit::new(&self.inner, from_vectors(&v, self.inner.dim())?).map_err(err)?;
        let full_index = split.full_index_at(t).map_err(err)?;
        let s_hat = split.transverse_riccati(t).map_err(err)?;
        let residual = split.transverse_residual(t, fd_step).map_err(err)?;
        let w = split.transfer_subfamily(t).map_err(err)?;
        let transfer = split.eigenvalue_transfer_check(t, &w).map_err(err)?;
        let a_norm = split.a_tensor(t).ok().map(|a| linalg::spectral_norm(&a));
        let out = serde_json::json!({
            "full_index": full_index,
            "s_hat": to_rows(&s_hat),
            "residual": residual,
            "transfer_difference": transfer.difference,
            "a_norm": a_norm,
        });
        json_value(py, &out)
    }
}

/// Scalar model solution `f~` of `f'' + kappa f = 0`, with
/// `lambda~ = f~' / f~`.
#[pyclass(name = "ModelSolution", frozen)]
struct PySolution {
    inner: ModelSolution,
}

#[pymethods]
impl PySolution {
    #[new]
    fn new(kappa: f64, c1: f64, c2: f64) -> PyResult<Self> {
        Ok(Self { inner: ModelSolution::new(kappa, c1, c2).map_err(err)? })
    }

    /// `cot(t + alpha)` on the unit sphere.
    #[staticmethod]
    fn shifted_cot(alpha: f64) -> Self {
        Self { inner: ModelSolution::shifted_cot(alpha) }
    }

    fn value(&self, t: f64) -> f64 {
        self.inner.value(t)
    }

    /// `lambda~(t)`, `None` at a pole.
    fn riccati(&self, t: f64) -> Option<f64> {
        self.inner.riccati(t).finite()
    }

    fn poles_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.inner.poles_in(lo, hi)
    }
}

/// Trace comparison of `S|_W` against `k lambda~` on `interval`.
#[pyfunction]
#[pyo3(signature = (family, w, k, solution, interval, samples = None))]
fn compare(
    py: Python<'_>,
    family: &PyFamily,
    w: Vec<Vec<f64>>,
    k: usize,
    solution: &PySolution,
    interval: (f64, f64),
    samples: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let mut cfg = ComparisonConfig::default();
    if let Some(s) = samples {
        cfg.samples = s;
    }
    let w = from_vectors(&w, family.inner.dim())?;
    let rep = intermediate_ricci_comparison(&family.inner, &w, k, &solution.inner, interval, &cfg).map_err(err)?;
    let mut v = serde_json::to_value(&rep).map_err(err)?;
    v["passed"] = rep.passed().into();
    json_value(py, &v)
}

/// Focal radius and focal count for `N` against the `Ric_k >= k` bound.
#[pyfunction]
fn theorem_a(py: Python<'_>, model: &PyModel, submanifold: &PySubmanifold, k: usize) -> PyResult<Py<PyAny>> {
    let sub = submanifold.placed(model.inner.normal_dim())?;
    let rep = theorem_a_check(&model.inner, &sub, k, FamilyConfig::default(), &ComparisonConfig::default());
    json_value(py, &serde_json::to_value(rep.map_err(err)?).map_err(err)?)
}

/// `[(id, description), ...]` of the registered examples.
#[pyfunction]
fn examples() -> Vec<(String, String)> {
    registry::examples()
}

#[pyfunction]
fn reproduce(py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
    match registry::reproduce(id) {
        Ok(rep) => {
            let mut v = serde_json::to_value(&rep).map_err(err)?;
            v["passed"] = rep.passed().into();
            json_value(py, &v)
        }
        Err(registry::ReproduceError::Unknown(e)) => Err(PyKeyError::new_err(e.to_string())),
        Err(e) => Err(err(e)),
    }
}

/// Runs a TOML scenario: `command` is `focal-radius`, `compare` or
/// `transverse-check`. Returns `{passed, summary, report, csv}`.
#[pyfunction]
fn run_config(py: Python<'_>, command: &str, toml: &str) -> PyResult<Py<PyAny>> {
    let sc = Scenario::parse(toml).map_err(err)?;
    let outcome = match command {
        "focal-radius" => scenario::run_focal_radius(&sc),
        "compare" => scenario::run_compare(&sc),
        "transverse-check" => scenario::run_transverse_check(&sc),
        other => return Err(err(format!("unknown command {other:?}"))),
    }
    .map_err(err)?;
    let v = serde_json::json!({
        "passed": outcome.passed,
        "summary": outcome.summary,
        "report": outcome.report,
        "csv": outcome.csv,
    });
    json_value(py, &v)
}

#[pymodule]
fn focal(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PySubmanifold>()?;
    m.add_class::<PyFamily>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_a, m)?)?;
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
