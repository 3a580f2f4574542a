//! Python bindings: group algebra, horizontal flow, control lattices, value
//! grids and the scenario runners.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

use heisgame::cli::{self, Scenario};
use heisgame::flow::{self, PiecewiseConstantControl, PlaneVector, SignConvention};
use heisgame::grid::io::read_value_grid;
use heisgame::group::{self, HPoint};
use heisgame::{Error, ValueGrid};

type Coords = (f64, f64, f64);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        Error::NonFinite { .. } | Error::NoSmoothProbes { .. } => PyArithmeticError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn sign_of(s: &str) -> PyResult<SignConvention> {
    match s {
        "plus" | "+" => Ok(SignConvention::Plus),
        "minus" | "-" => Ok(SignConvention::Minus),
        _ => Err(PyValueError::new_err(format!("sign must be 'plus' or 'minus', got {s:?}"))),
    }
}

/// A point of the Heisenberg group.
#[pyclass(name = "HPoint", from_py_object)]
#[derive(Clone, Copy)]
struct PyHPoint {
    inner: HPoint,
}

#[pymethods]
#[allow(clippy::wrong_self_convention)]
impl PyHPoint {
    #[new]
    #[pyo3(signature = (x1=0.0, x2=0.0, x3=0.0))]
    fn new(x1: f64, x2: f64, x3: f64) -> Self {
        PyHPoint { inner: HPoint::new(x1, x2, x3) }
    }

    #[getter]
    fn x1(&self) -> f64 {
        self.inner.x1
    }

    #[getter]
    fn x2(&self) -> f64 {
        self.inner.x2
    }

    #[getter]
    fn x3(&self) -> f64 {
        self.inner.x3
    }

    fn to_tuple(&self) -> Coords {
        (self.inner.x1, self.inner.x2, self.inner.x3)
    }

    fn __mul__(&self, other: &PyHPoint) -> PyHPoint {
        PyHPoint { inner: group::group_mul(&self.inner, &other.inner) }
    }

    fn inverse(&self) -> PyHPoint {
        PyHPoint { inner: group::inverse(&self.inner) }
    }

    fn gauge(&self) -> f64 {
        group::gauge(&self.inner)
    }

    fn dilate(&self, factor: f64) -> PyResult<PyHPoint> {
        Ok(PyHPoint { inner: group::dilate(factor, &self.inner).map_err(to_py)? })
    }

    fn __eq__(&self, other: &PyHPoint) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("HPoint({}, {}, {})", self.inner.x1, self.inner.x2, self.inner.x3)
    }
}

#[pyfunction]
fn group_mul(a: PyHPoint, b: PyHPoint) -> PyHPoint {
    PyHPoint { inner: group::group_mul(&a.inner, &b.inner) }
}

#[pyfunction]
fn gauge(x: PyHPoint) -> f64 {
    group::gauge(&x.inner)
}

/// `d_G(x, y) = ‖y⁻¹∘x‖_G`.
#[pyfunction]
fn dist_g(x: PyHPoint, y: PyHPoint) -> f64 {
    group::dist_g(&x.inner, &y.inner)
}

#[pyfunction]
#[pyo3(signature = (xi, z, h, sign="plus"))]
fn exact_step(xi: PyHPoint, z: (f64, f64), h: f64, sign: &str) -> PyResult<PyHPoint> {
    let p = flow::exact_step(&xi.inner, &PlaneVector::new(z.0, z.1), h, sign_of(sign)?).map_err(to_py)?;
    Ok(PyHPoint { inner: p })
}

/// Curve from `xi` under a control with uniform segments of length `dt`.
/// Returns `(t, (x1, x2, x3))` at the start and every breakpoint, plus
/// `samples` interior points per segment.
#[pyfunction]
#[pyo3(signature = (xi, dt, controls, sign="plus", samples=0))]
fn integrate(xi: PyHPoint, dt: f64, controls: Vec<(f64, f64)>, sign: &str, samples: usize) -> PyResult<Vec<(f64, Coords)>> {
    let values = controls.into_iter().map(|(a, b)| PlaneVector::new(a, b)).collect();
    let u = PiecewiseConstantControl::uniform(0.0, dt, values).map_err(to_py)?;
    let traj = flow::integrate_sampled(&xi.inner, &u, sign_of(sign)?, samples);
    Ok(traj.points.iter().map(|(t, p)| (*t, (p.x1, p.x2, p.x3))).collect())
}

/// Points of the control lattice `make_lattice(radius, rings, base_angles)`
/// and its covering radius.
#[pyfunction]
fn make_lattice(radius: f64, rings: usize, base_angles: usize) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let l = heisgame::make_lattice(radius, rings, base_angles).map_err(to_py)?;
    Ok((l.points.iter().map(|p| (p.z1, p.z2)).collect(), l.covering_radius))
}

/// Value grid read from a directory written by `solve`.
#[pyclass(name = "ValueGrid")]
struct PyValueGrid {
    inner: ValueGrid,
}

#[pymethods]
impl PyValueGrid {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(PyValueGrid { inner: read_value_grid(&dir).map_err(to_py)? })
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn counts(&self) -> [usize; 3] {
        self.inner.spec().counts
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Nodal values of one slice, third axis fastest.
    fn values(&self, slice: usize) -> PyResult<Vec<f64>> {
        self.inner
            .slices
            .get(slice)
            .map(|g| g.values.clone())
            .ok_or_else(|| PyValueError::new_err(format!("slice {slice} out of range")))
    }

    /// Trilinear value at `x` in one slice and whether it is trusted.
    fn interp(&self, slice: usize, x: PyHPoint) -> PyResult<(f64, bool)> {
        let g = self
            .inner
            .slices
            .get(slice)
            .ok_or_else(|| PyValueError::new_err(format!("slice {slice} out of range")))?;
        let r = g.interp(&x.inner);
        Ok((r.value, r.trusted && self.inner.trusted_region.contains(&x.inner)))
    }

    fn trusted_nodes(&self) -> Vec<usize> {
        self.inner.trusted_nodes()
    }
}

/// JSON text of the canonical scenario.
#[pyfunction]
fn canonical_scenario() -> String {
    Scenario::canonical().to_json()
}

/// Solves a scenario given as JSON text and returns the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, out, csv=false))]
fn solve(py: Python<'_>, scenario: &str, out: PathBuf, csv: bool) -> PyResult<String> {
    let sc = Scenario::from_json(scenario).map_err(to_py)?;
    let summary = py.detach(|| cli::run_solve(&sc, &out, csv)).map_err(to_py)?;
    serde_json::to_string(&summary.manifest).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Runs the check bundle and returns it as JSON.
#[pyfunction]
fn verify(py: Python<'_>, scenario: &str, out: PathBuf) -> PyResult<String> {
    let sc = Scenario::from_json(scenario).map_err(to_py)?;
    let bundle = py.detach(|| cli::run_verify(&sc, &out)).map_err(to_py)?;
    serde_json::to_string(&bundle).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn heisgame_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHPoint>()?;
    m.add_class::<PyValueGrid>()?;
    m.add_function(wrap_pyfunction!(group_mul, m)?)?;
    m.add_function(wrap_pyfunction!(gauge, m)?)?;
    m.add_function(wrap_pyfunction!(dist_g, m)?)?;
    m.add_function(wrap_pyfunction!(exact_step, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(make_lattice, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
