//! Python bindings for `biharm_core`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use biharm_core::engine as eng;
use biharm_core::{kernels, quad, Error};

create_exception!(
    biharm,
    BiharmError,
    PyException,
    "Numerical failure in the cubature engine."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Domain { .. } | Error::UnsupportedDimension(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => BiharmError::new_err(e.to_string()),
    }
}

fn dim(n: usize) -> PyResult<biharm_core::Dimension> {
    biharm_core::Dimension::new(n).map_err(to_py)
}

fn order(m: u32) -> PyResult<biharm_core::BasisOrder> {
    biharm_core::BasisOrder::new(m).map_err(to_py)
}

#[pyclass(name = "GridSpec", module = "biharm", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGridSpec {
    inner: biharm_core::GridSpec,
}

#[pymethods]
impl PyGridSpec {
    #[new]
    #[pyo3(signature = (h, d = 5.0, radius = 6.5))]
    fn new(h: f64, d: f64, radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: biharm_core::GridSpec::new(h, d, radius).map_err(to_py)?,
        })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.d
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius
    }

    /// Largest sample index L with L·h <= radius.
    fn max_index(&self) -> i64 {
        self.inner.max_index()
    }

    fn __repr__(&self) -> String {
        format!(
            "GridSpec(h={}, d={}, radius={})",
            self.inner.h, self.inner.d, self.inner.radius
        )
    }
}

#[pyclass(name = "DEQuadrature", module = "biharm", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDEQuadrature {
    inner: quad::DEQuadrature,
}

#[pymethods]
impl PyDEQuadrature {
    #[new]
    #[pyo3(signature = (a = 6.0, b = 5.0, tau = 0.003, nodes = 300))]
    fn new(a: f64, b: f64, tau: f64, nodes: usize) -> PyResult<Self> {
        Ok(Self {
            inner: quad::DEQuadrature::with_nodes(a, b, tau, nodes).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Same u-range with half the step.
    fn refined(&self) -> Self {
        Self {
            inner: self.inner.refined(),
        }
    }

    /// List of (t, weight) pairs.
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.nodes().iter().map(|n| (n.t, n.weight)).collect()
    }

    fn __repr__(&self) -> String {
        let q = &self.inner;
        format!("DEQuadrature(a={}, b={}, tau={}, nodes={})", q.a, q.b, q.tau, q.len())
    }
}

fn rule_or_default(rule: Option<&PyDEQuadrature>) -> quad::DEQuadrature {
    rule.map(|r| r.inner).unwrap_or_default()
}

#[pyclass(name = "PotentialSample", module = "biharm", frozen, skip_from_py_object)]
pub struct PyPotentialSample {
    #[pyo3(get)]
    point: Vec<f64>,
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    method: &'static str,
    #[pyo3(get)]
    order: u32,
    #[pyo3(get)]
    h: f64,
    #[pyo3(get)]
    d: f64,
}

impl From<kernels::PotentialSample> for PyPotentialSample {
    fn from(s: kernels::PotentialSample) -> Self {
        Self {
            point: s.point,
            value: s.value,
            method: s.method.as_str(),
            order: s.order,
            h: s.h,
            d: s.d,
        }
    }
}

#[pymethods]
impl PyPotentialSample {
    fn __repr__(&self) -> String {
        format!(
            "PotentialSample(value={:e}, method='{}', order={}, h={})",
            self.value, self.method, self.order, self.h
        )
    }
}

/// Rank-P sum of products of sampled 1-D functions.
#[pyclass(name = "SeparatedDensity", module = "biharm", frozen, skip_from_py_object)]
pub struct PySeparatedDensity {
    inner: eng::SeparatedDensity,
}

#[pymethods]
impl PySeparatedDensity {
    /// `factors` is the pool of sample vectors over `index_min ..`; each term is
    /// `(weight, [factor id per dimension])`.
    #[new]
    fn new(n: usize, index_min: i64, factors: Vec<Vec<f64>>, terms: Vec<(f64, Vec<usize>)>) -> PyResult<Self> {
        let terms = terms
            .into_iter()
            .map(|(weight, factors)| eng::SeparatedTerm { weight, factors })
            .collect();
        Ok(Self {
            inner: eng::SeparatedDensity::new(n, index_min, factors, terms).map_err(to_py)?,
        })
    }

    /// Separated form of the reference density whose potential is e^{-|x|²}.
    #[staticmethod]
    fn test_density(n: usize, grid: &PyGridSpec) -> PyResult<Self> {
        Ok(Self {
            inner: eng::build_test_density(n, &grid.inner).map_err(to_py)?,
        })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value_at(&self, m: Vec<i64>) -> PyResult<f64> {
        if m.len() != self.inner.dim() {
            return Err(PyValueError::new_err("index length differs from the dimension"));
        }
        Ok(self.inner.value_at(&m))
    }

    /// Cubature values at grid index vectors.
    #[pyo3(signature = (points, grid, order, rule = None))]
    fn evaluate(
        &self,
        py: Python<'_>,
        points: Vec<Vec<i64>>,
        grid: &PyGridSpec,
        order: u32,
        rule: Option<&PyDEQuadrature>,
    ) -> PyResult<Vec<PyPotentialSample>> {
        let m = self::order(order)?;
        let rule = rule_or_default(rule);
        let out = py
            .detach(|| eng::evaluate(&self.inner, &points, &grid.inner, m, &rule))
            .map_err(to_py)?;
        Ok(out.into_iter().map(Into::into).collect())
    }
}

/// Density e^{-|x|²}(c0 + c1|x|² + c2|x|⁴) in n dimensions.
#[pyclass(
    name = "IsotropicGaussianPolyDensity",
    module = "biharm",
    frozen,
    skip_from_py_object
)]
pub struct PyIsotropicDensity {
    inner: eng::IsotropicGaussianPolyDensity,
}

#[pymethods]
impl PyIsotropicDensity {
    #[new]
    fn new(n: usize, c0: f64, c1: f64, c2: f64) -> PyResult<Self> {
        Ok(Self {
            inner: eng::IsotropicGaussianPolyDensity::new(n, c0, c1, c2).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn test_density(n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: eng::IsotropicGaussianPolyDensity::test_density(n).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn coeffs(&self) -> (f64, f64, f64) {
        let [a, b, c] = self.inner.coeffs;
        (a, b, c)
    }

    fn value_at(&self, x: Vec<f64>) -> f64 {
        self.inner.value_at(&x)
    }

    fn to_separated(&self, grid: &PyGridSpec) -> PyResult<PySeparatedDensity> {
        Ok(PySeparatedDensity {
            inner: self.inner.to_separated(&grid.inner).map_err(to_py)?,
        })
    }

    /// Cubature at the grid point (h·k1, 0, …, 0); cost independent of n.
    #[pyo3(signature = (k1, grid, order, rule = None))]
    fn evaluate_axis(
        &self,
        py: Python<'_>,
        k1: i64,
        grid: &PyGridSpec,
        order: u32,
        rule: Option<&PyDEQuadrature>,
    ) -> PyResult<PyPotentialSample> {
        let m = self::order(order)?;
        let rule = rule_or_default(rule);
        let s = py
            .detach(|| eng::evaluate_symmetric(&self.inner, eng::AxisPoint { k1 }, &grid.inner, m, &rule))
            .map_err(to_py)?;
        Ok(s.into())
    }
}

/// Potential of e^{-|x|²} at radius r.
#[pyfunction]
fn phi2(n: usize, r: f64) -> PyResult<f64> {
    Ok(kernels::phi2(dim(n)?, r))
}

/// Potential of the order-2M radial basis function at radius r.
#[pyfunction]
fn phi2m(n: usize, order: u32, r: f64) -> PyResult<f64> {
    Ok(kernels::phi2m(dim(n)?, self::order(order)?, r))
}

/// phi2 through the one-dimensional DE quadrature.
#[pyfunction]
#[pyo3(signature = (n, r, rule = None))]
fn integral_phi2(n: usize, r: f64, rule: Option<&PyDEQuadrature>) -> PyResult<f64> {
    quad::integral_phi2(dim(n)?, r, &rule_or_default(rule)).map_err(to_py)
}

#[pyfunction]
fn qm_poly(order: u32, x: f64, t: f64) -> PyResult<f64> {
    Ok(quad::qm_poly(self::order(order)?, x, t))
}

#[pyfunction]
fn rm_poly(order: u32, x: f64, t: f64) -> PyResult<f64> {
    Ok(quad::rm_poly(self::order(order)?, x, t))
}

/// Direct lattice sum for a Python callable density f(x: list[float]) -> float.
#[pyfunction]
fn direct_cubature(f: Bound<'_, PyAny>, grid: &PyGridSpec, order: u32, x: Vec<f64>) -> PyResult<PyPotentialSample> {
    let m = self::order(order)?;
    let failure = std::cell::RefCell::new(None);
    let eval = |p: &[f64]| -> f64 {
        match f.call1((p.to_vec(),)).and_then(|v| v.extract::<f64>()) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let res = kernels::direct_cubature(eval, &grid.inner, m, &x);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(res.map_err(to_py)?.into())
}

/// Off-origin lattice sum of the tensor generating function's transform.
#[pyfunction]
#[pyo3(signature = (order, d, n, cutoff = 3))]
fn saturation_epsilon0(order: u32, d: f64, n: usize, cutoff: usize) -> PyResult<f64> {
    Ok(eng::saturation_epsilon0(self::order(order)?, d, n, cutoff)
        .map_err(to_py)?
        .epsilon0)
}

#[pymodule]
fn biharm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BiharmError", m.py().get_type::<BiharmError>())?;
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyDEQuadrature>()?;
    m.add_class::<PyPotentialSample>()?;
    m.add_class::<PySeparatedDensity>()?;
    m.add_class::<PyIsotropicDensity>()?;
    m.add_function(wrap_pyfunction!(phi2, m)?)?;
    m.add_function(wrap_pyfunction!(phi2m, m)?)?;
    m.add_function(wrap_pyfunction!(integral_phi2, m)?)?;
    m.add_function(wrap_pyfunction!(qm_poly, m)?)?;
    m.add_function(wrap_pyfunction!(rm_poly, m)?)?;
    m.add_function(wrap_pyfunction!(direct_cubature, m)?)?;
    m.add_function(wrap_pyfunction!(saturation_epsilon0, m)?)?;
    Ok(())
}
