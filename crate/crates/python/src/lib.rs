//! Python bindings: grids, fields, generators, semigroup routes, perturbation reports and special functions.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use heisenberg_semigroups::generators::GeneratorSpec;
use heisenberg_semigroups::grid::{self, GridSpec, SampledField, Space};
use heisenberg_semigroups::group_conv::{self, ConvMethod, ThetaLaw};
use heisenberg_semigroups::semigroups::{self, ContourSpec, Route};
use heisenberg_semigroups::{cli, perturbation, specfun, verify, Error, C64};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_)
        | Error::Parse(_)
        | Error::InvalidDimension(_)
        | Error::NonPositiveExtent { .. }
        | Error::Domain(_)
        | Error::CapExceeded { .. }
        | Error::GridMismatch(_)
        | Error::WrongSpace { .. }
        | Error::MultiindexLength { .. }
        | Error::UnsupportedMultiindex(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn parse_space(s: &str) -> PyResult<Space> {
    match s {
        "position" => Ok(Space::Position),
        "frequency" => Ok(Space::Frequency),
        _ => Err(PyValueError::new_err(format!("space must be 'position' or 'frequency', got {s:?}"))),
    }
}

/// Uniform grid: `n = 0` for Euclidean grids, `n >= 1` for the Heisenberg group of dimension `2n + 1`.
#[pyclass(name = "Grid", module = "heisenberg_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n: usize, points: Vec<usize>, half_extent: Vec<f64>) -> PyResult<Self> {
        let inner = if n == 0 {
            GridSpec::euclidean(&points, &half_extent)
        } else {
            grid::make_grid(n, &points, &half_extent)
        }
        .map_err(err)?;
        Ok(PyGrid { inner })
    }

    #[staticmethod]
    fn cubic(n: usize, points: usize, half_extent: f64) -> PyResult<Self> {
        Ok(PyGrid { inner: GridSpec::cubic(n, points, half_extent).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn points(&self) -> Vec<usize> {
        self.inner.points.clone()
    }

    #[getter]
    fn half_extent(&self) -> Vec<f64> {
        self.inner.half_extent.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn spacing(&self, axis: usize) -> PyResult<f64> {
        if axis >= self.inner.dim() {
            return Err(PyValueError::new_err(format!("axis {axis} out of range")));
        }
        Ok(self.inner.spacing(axis))
    }

    #[pyo3(signature = (axis, space = "position"))]
    fn axis_values(&self, axis: usize, space: &str) -> PyResult<Vec<f64>> {
        if axis >= self.inner.dim() {
            return Err(PyValueError::new_err(format!("axis {axis} out of range")));
        }
        Ok(self.inner.axis_values(axis, parse_space(space)?))
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, points={:?}, half_extent={:?})", self.inner.n, self.inner.points, self.inner.half_extent)
    }
}

/// Complex samples on a grid, row-major with the last axis fastest.
#[pyclass(name = "Field", module = "heisenberg_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: SampledField,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (grid, values, space = "position"))]
    fn new(grid: &PyGrid, values: Vec<C64>, space: &str) -> PyResult<Self> {
        let inner = SampledField::new(grid.inner.clone(), values, parse_space(space)?).map_err(err)?;
        Ok(PyField { inner })
    }

    #[staticmethod]
    fn delta(grid: &PyGrid) -> Self {
        PyField { inner: SampledField::delta(&grid.inner) }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyField { inner: SampledField::from_json_value(&v).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json_value().to_string()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid().clone() }
    }

    #[getter]
    fn space(&self) -> &'static str {
        match self.inner.space() {
            Space::Position => "position",
            Space::Frequency => "frequency",
        }
    }

    #[getter]
    fn values(&self) -> Vec<C64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.values().len()
    }

    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn integral(&self) -> C64 {
        self.inner.integral()
    }

    fn l2_norm_sq(&self) -> f64 {
        self.inner.l2_norm_sq()
    }

    fn forward(&self) -> PyResult<Self> {
        Ok(PyField { inner: grid::fourier_forward(&self.inner).map_err(err)? })
    }

    fn inverse(&self) -> PyResult<Self> {
        Ok(PyField { inner: grid::fourier_inverse(&self.inner).map_err(err)? })
    }

    fn __sub__(&self, other: &PyField) -> PyResult<Self> {
        Ok(PyField { inner: self.inner.sub(&other.inner).map_err(err)? })
    }

    fn __add__(&self, other: &PyField) -> PyResult<Self> {
        Ok(PyField { inner: self.inner.add(&other.inner).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("Field({} points, {})", self.inner.values().len(), self.space())
    }
}

/// Generator `P` given by a radial symbol `psi(xi) = phi(|xi|^2)`.
#[pyclass(name = "Generator", module = "heisenberg_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyGenerator {
    inner: GeneratorSpec,
}

#[pymethods]
impl PyGenerator {
    /// Built-in generator: `gamma_variance`, `gamma_full`, `relativistic` or `relativistic:s`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyGenerator { inner: GeneratorSpec::by_name(name).map_err(err)? })
    }

    /// Sum of `const`, `log1p` and `pow(s)` terms, as in `1*log1p + 0.5*pow(0.5)`.
    #[staticmethod]
    fn composition(name: &str, expr: &str) -> PyResult<Self> {
        Ok(PyGenerator { inner: GeneratorSpec::from_composition(name, expr).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn psi(&self, xi: Vec<f64>) -> f64 {
        self.inner.psi(&xi)
    }

    fn __repr__(&self) -> String {
        format!("Generator({:?})", self.inner.name)
    }
}

fn parse_method(method: &str) -> PyResult<ConvMethod> {
    match method {
        "spectral" => Ok(ConvMethod::Spectral),
        "direct" => Ok(ConvMethod::Direct),
        _ => Err(PyValueError::new_err(format!("method must be 'spectral' or 'direct', got {method:?}"))),
    }
}

/// `f *_theta g`; `theta = 0` is Euclidean and `theta = 1` Heisenberg convolution.
#[pyfunction]
#[pyo3(signature = (f, g, theta = 1.0, method = "spectral"))]
fn convolve(py: Python<'_>, f: &PyField, g: &PyField, theta: f64, method: &str) -> PyResult<PyField> {
    let law = ThetaLaw::new(theta).map_err(err)?;
    let method = parse_method(method)?;
    let out = py.detach(|| group_conv::convolve(law, &f.inner, &g.inner, method)).map_err(err)?;
    Ok(PyField { inner: out })
}

/// `(field, diagnostics)` for `route` in `fourier`, `expm`, `contour`.
#[pyfunction]
#[pyo3(signature = (generator, t, grid, route = "expm", theta = 1.0))]
fn semigroup<'py>(
    py: Python<'py>,
    generator: &PyGenerator,
    t: f64,
    grid: &PyGrid,
    route: &str,
    theta: f64,
) -> PyResult<(PyField, Bound<'py, PyAny>)> {
    let route: Route = route.parse().map_err(err)?;
    let (spec, g) = (&generator.inner, &grid.inner);
    let res = py
        .detach(|| match route {
            Route::Fourier => semigroups::abelian_semigroup(spec, t, g),
            Route::Expm => semigroups::semigroup_expm(spec, t, g, theta),
            Route::Contour => semigroups::contour_semigroup_theta(spec, g, theta, &ContourSpec::new(t)?),
        })
        .map_err(err)?;
    let diag = to_py(py, &res)?;
    Ok((PyField { inner: res.field }, diag))
}

/// Solves `(z - A_theta) b = delta`.
#[pyfunction]
#[pyo3(signature = (generator, z, grid, theta = 1.0))]
fn resolvent(py: Python<'_>, generator: &PyGenerator, z: C64, grid: &PyGrid, theta: f64) -> PyResult<PyField> {
    let out = py.detach(|| semigroups::resolvent(&generator.inner, z, theta, &grid.inner)).map_err(err)?;
    Ok(PyField { inner: out })
}

/// First-order correction term at time `t`.
#[pyfunction]
fn correction(py: Python<'_>, generator: &PyGenerator, t: f64, grid: &PyGrid) -> PyResult<PyField> {
    let out = py.detach(|| perturbation::correction_term(&generator.inner, t, &grid.inner)).map_err(err)?;
    Ok(PyField { inner: out })
}

/// `r_t = mu_t - nu_t + correction`.
#[pyfunction]
fn remainder(py: Python<'_>, generator: &PyGenerator, t: f64, grid: &PyGrid) -> PyResult<PyField> {
    let out = py.detach(|| perturbation::remainder(&generator.inner, t, &grid.inner)).map_err(err)?;
    Ok(PyField { inner: out })
}

/// Decay report `{p, shells, entries: [{t, C}], ratio}` for `(t, field)` pairs.
#[pyfunction]
#[pyo3(signature = (fields, p = 5.0))]
fn decay_report<'py>(py: Python<'py>, fields: Vec<(f64, PyField)>, p: f64) -> PyResult<Bound<'py, PyAny>> {
    let fields: Vec<(f64, SampledField)> = fields.into_iter().map(|(t, f)| (t, f.inner)).collect();
    let rep = perturbation::decay_report(&fields, p).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
fn bessel_k(nu: f64, x: f64) -> PyResult<f64> {
    specfun::bessel_k(nu, x).map_err(err)
}

#[pyfunction]
fn gamma_fn(t: f64) -> PyResult<f64> {
    specfun::gamma_fn(t).map_err(err)
}

#[pyfunction]
fn gamma_variance_density(t: f64, d: usize, r: f64) -> PyResult<f64> {
    specfun::gamma_variance_density(t, d, r).map_err(err)
}

#[pyfunction]
fn asymptotic_classify<'py>(py: Python<'py>, t: f64, d: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &specfun::asymptotic_classify(t, d))
}

#[pyfunction]
fn slope_fit(samples: Vec<(f64, f64)>) -> PyResult<f64> {
    specfun::slope_fit(&samples).map_err(err)
}

/// Names of the invariant suites.
#[pyfunction]
fn suites() -> Vec<&'static str> {
    verify::suites().iter().map(|s| s.name).collect()
}

/// Runs suites matching `pattern` (a name or module prefix); all when `None`.
#[pyfunction]
#[pyo3(signature = (pattern = None))]
fn run_suites<'py>(py: Python<'py>, pattern: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let out = py.detach(|| verify::run(pattern)).map_err(err)?;
    to_py(py, &out)
}

/// Runs the command line with `args` (without the program name) and returns its exit code.
#[pyfunction]
fn cli_main(py: Python<'_>, args: Vec<String>) -> i32 {
    let mut argv = vec!["heisen".to_string()];
    argv.extend(args);
    py.detach(|| cli::run(&argv))
}

#[pymodule]
fn heisenberg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(convolve, m)?)?;
    m.add_function(wrap_pyfunction!(semigroup, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent, m)?)?;
    m.add_function(wrap_pyfunction!(correction, m)?)?;
    m.add_function(wrap_pyfunction!(remainder, m)?)?;
    m.add_function(wrap_pyfunction!(decay_report, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_fn, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_variance_density, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_classify, m)?)?;
    m.add_function(wrap_pyfunction!(slope_fit, m)?)?;
    m.add_function(wrap_pyfunction!(suites, m)?)?;
    m.add_function(wrap_pyfunction!(run_suites, m)?)?;
    m.add_function(wrap_pyfunction!(cli_main, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn json_values_convert() {
        Python::initialize();
        Python::attach(|py| {
            let v = json!({ "a": [1, 2.5, null], "b": true, "c": "x" });
            let o = json_to_py(py, &v).unwrap();
            let d = o.cast::<PyDict>().unwrap();
            let a = d.get_item("a").unwrap().unwrap();
            assert_eq!(a.get_item(0).unwrap().extract::<i64>().unwrap(), 1);
            assert_eq!(a.get_item(1).unwrap().extract::<f64>().unwrap(), 2.5);
            assert!(a.get_item(2).unwrap().is_none());
            assert!(d.get_item("b").unwrap().unwrap().extract::<bool>().unwrap());
            assert_eq!(d.get_item("c").unwrap().unwrap().extract::<String>().unwrap(), "x");
        });
    }

    #[test]
    fn errors_map_to_python_types() {
        Python::initialize();
        Python::attach(|py| {
            assert!(err(Error::Parse("x".into())).is_instance_of::<PyValueError>(py));
            assert!(err(Error::NotConverged("x".into())).is_instance_of::<PyRuntimeError>(py));
        });
    }
}
