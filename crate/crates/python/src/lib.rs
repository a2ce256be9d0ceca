//! Python bindings. Vectors cross the boundary as lists of floats.

use ::bcsoftmax::autodiff::{self, JacobianFactors};
use ::bcsoftmax::calib::{self, CalibKind, FitConfig, Flags, LabeledLogitSet};
use ::bcsoftmax::oracle;
use ::bcsoftmax::{BoxBounds, Error, LogitVector, LowerBounds, Temperature, UpperBounds};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Internal(_) | Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn logits(x: Vec<f64>) -> PyResult<LogitVector> {
    LogitVector::new(x).map_err(py_err)
}

fn temperature(tau: f64) -> PyResult<Temperature> {
    Temperature::new(tau).map_err(py_err)
}

/// Missing sides default to `a = 0`, `b = 1`.
fn bounds(k: usize, a: Option<Vec<f64>>, b: Option<Vec<f64>>) -> PyResult<BoxBounds> {
    let a = a.unwrap_or_else(|| vec![0.0; k]);
    let b = b.unwrap_or_else(|| vec![1.0; k]);
    BoxBounds::from_vecs(a, b).map_err(py_err)
}

/// Plain softmax of `x / tau`.
#[pyfunction]
#[pyo3(signature = (x, tau = 1.0))]
fn softmax(x: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    Ok(::bcsoftmax::softmax(&logits(x)?, temperature(tau)?).into_inner())
}

/// Box-constrained softmax. `algo` is "sorted" or "quadratic".
#[pyfunction]
#[pyo3(name = "bcsoftmax", signature = (x, a = None, b = None, tau = 1.0, algo = "sorted"))]
fn py_bcsoftmax(
    x: Vec<f64>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    tau: f64,
    algo: &str,
) -> PyResult<Vec<f64>> {
    let bounds = bounds(x.len(), a, b)?;
    let (x, tau) = (logits(x)?, temperature(tau)?);
    let result = match algo {
        "sorted" => ::bcsoftmax::bcsoftmax(&x, &bounds, tau),
        "quadratic" => ::bcsoftmax::bcsoftmax_quadratic(&x, &bounds, tau),
        _ => return Err(PyValueError::new_err(format!("unknown algo '{algo}'"))),
    };
    Ok(result.map_err(py_err)?.0.into_inner())
}

/// Like `bcsoftmax`, also returning the lower- and upper-pinned masks.
#[pyfunction]
#[pyo3(signature = (x, a = None, b = None, tau = 1.0))]
fn bcsoftmax_active(
    x: Vec<f64>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    tau: f64,
) -> PyResult<(Vec<f64>, Vec<bool>, Vec<bool>)> {
    let bounds = bounds(x.len(), a, b)?;
    let (p, active) =
        ::bcsoftmax::bcsoftmax(&logits(x)?, &bounds, temperature(tau)?).map_err(py_err)?;
    Ok((p.into_inner(), active.lower_pinned, active.upper_pinned))
}

/// Upper-bounded softmax. `method` is "select" or "sorted".
#[pyfunction]
#[pyo3(signature = (x, b, tau = 1.0, method = "select"))]
fn ubsoftmax(x: Vec<f64>, b: Vec<f64>, tau: f64, method: &str) -> PyResult<Vec<f64>> {
    let b = UpperBounds::new(b).map_err(py_err)?;
    let (x, tau) = (logits(x)?, temperature(tau)?);
    let result = match method {
        "select" => ::bcsoftmax::ubsoftmax_select(&x, &b, tau),
        "sorted" => ::bcsoftmax::ubsoftmax_sorted(&x, &b, tau),
        _ => return Err(PyValueError::new_err(format!("unknown method '{method}'"))),
    };
    Ok(result.map_err(py_err)?.0.into_inner())
}

#[pyfunction]
#[pyo3(signature = (x, a, tau = 1.0))]
fn lbsoftmax(x: Vec<f64>, a: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    let a = LowerBounds::new(a).map_err(py_err)?;
    let (p, _) = ::bcsoftmax::lbsoftmax(&logits(x)?, &a, temperature(tau)?).map_err(py_err)?;
    Ok(p.into_inner())
}

/// Brute-force reference solution (K <= 12).
#[pyfunction]
#[pyo3(signature = (x, a = None, b = None, tau = 1.0))]
fn solve_enumerate(
    x: Vec<f64>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    tau: f64,
) -> PyResult<Vec<f64>> {
    let bounds = bounds(x.len(), a, b)?;
    let p = oracle::solve_enumerate(&logits(x)?, &bounds, temperature(tau)?).map_err(py_err)?;
    Ok(p.into_inner())
}

/// Thresholds `(c, C)` such that `softmax(clip(x, c, C))` equals the
/// box-constrained softmax with scalar bounds `a`, `b`.
#[pyfunction]
#[pyo3(signature = (x, a, b, tau = 1.0))]
fn scalar_bounds_to_clip(x: Vec<f64>, a: f64, b: f64, tau: f64) -> PyResult<(f64, f64)> {
    ::bcsoftmax::scalar_bounds_to_clip(&logits(x)?, a, b, temperature(tau)?).map_err(py_err)
}

fn factors(x: Vec<f64>, a: Option<Vec<f64>>, b: Option<Vec<f64>>) -> PyResult<JacobianFactors> {
    let bounds = bounds(x.len(), a, b)?;
    autodiff::jacobian_factors(&logits(x)?, &bounds).map_err(py_err)
}

/// `(vᵀ ∂p/∂x, vᵀ ∂p/∂a, vᵀ ∂p/∂b)` at `τ = 1`.
#[pyfunction]
#[pyo3(signature = (x, v, a = None, b = None))]
fn vjp(
    x: Vec<f64>,
    v: Vec<f64>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let f = factors(x, a, b)?;
    if v.len() != f.len() {
        return Err(PyValueError::new_err("v has the wrong length"));
    }
    Ok((
        autodiff::vjp_x(&f, &v),
        autodiff::vjp_a(&f, &v),
        autodiff::vjp_b(&f, &v),
    ))
}

/// Directional derivative of `p` along `(dx, da, db)` at `τ = 1`.
#[pyfunction]
#[pyo3(signature = (x, dx, da, db, a = None, b = None))]
fn jvp(
    x: Vec<f64>,
    dx: Vec<f64>,
    da: Vec<f64>,
    db: Vec<f64>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let f = factors(x, a, b)?;
    if [dx.len(), da.len(), db.len()].iter().any(|&n| n != f.len()) {
        return Err(PyValueError::new_err("tangents have the wrong length"));
    }
    Ok(autodiff::jvp(&f, &dx, &da, &db))
}

/// Top-label ECE with equal-width bins.
#[pyfunction]
#[pyo3(signature = (probs, labels, bins = 15))]
fn ece(probs: Vec<Vec<f64>>, labels: Vec<usize>, bins: usize) -> PyResult<f64> {
    Ok(calib::ece_from_probs(&probs, &labels, bins)
        .map_err(py_err)?
        .ece)
}

type SyntheticData = (Vec<Vec<f64>>, Vec<usize>, Vec<Vec<f64>>);

/// `(logits, labels, features)` of a synthetic overconfident classifier.
#[pyfunction]
#[pyo3(signature = (n, k, scale = 3.0, seed = 0))]
fn gen_synthetic(n: usize, k: usize, scale: f64, seed: u64) -> PyResult<SyntheticData> {
    let data = calib::gen_synthetic(n, k, scale, seed).map_err(py_err)?;
    let logits = (0..n).map(|i| data.logits(i).to_vec()).collect();
    let features = (0..n)
        .map(|i| data.features(i).unwrap_or_default().to_vec())
        .collect();
    Ok((logits, data.labels().to_vec(), features))
}

/// A fitted calibration map (TS, PB-C, PB-L, LB-C or LB-L).
#[pyclass(name = "CalibModel", module = "bcsoftmax_py")]
struct PyCalibModel {
    inner: calib::CalibModel,
}

#[pymethods]
impl PyCalibModel {
    #[staticmethod]
    #[pyo3(signature = (
        kind, logits, labels, features = None, epochs = 500, batch_size = 128,
        learning_rate = 1e-3, seed = 0, use_lower = true, use_upper = true,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        kind: &str,
        logits: Vec<Vec<f64>>,
        labels: Vec<usize>,
        features: Option<Vec<Vec<f64>>>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
        use_lower: bool,
        use_upper: bool,
    ) -> PyResult<Self> {
        let kind: CalibKind = kind.parse().map_err(py_err)?;
        let data = LabeledLogitSet::new(logits, labels, features).map_err(py_err)?;
        let config = FitConfig {
            epochs,
            batch_size,
            learning_rate,
            seed,
            flags: Flags {
                use_lower,
                use_upper,
            },
            ..FitConfig::default()
        };
        let inner = calib::fit(kind, &data, &config).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        let inner = calib::CalibModel::from_json(s).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn tau(&self) -> PyResult<f64> {
        Ok(self.inner.tau().map_err(py_err)?.get())
    }

    #[pyo3(signature = (logits, features = None))]
    fn predict(&self, logits: Vec<f64>, features: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let p = self
            .inner
            .predict(&logits, features.as_deref())
            .map_err(py_err)?;
        Ok(p.into_inner())
    }

    fn __repr__(&self) -> String {
        format!("CalibModel({})", self.inner.to_json())
    }
}

#[pymodule]
fn bcsoftmax_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(py_bcsoftmax, m)?)?;
    m.add_function(wrap_pyfunction!(bcsoftmax_active, m)?)?;
    m.add_function(wrap_pyfunction!(ubsoftmax, m)?)?;
    m.add_function(wrap_pyfunction!(lbsoftmax, m)?)?;
    m.add_function(wrap_pyfunction!(solve_enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_bounds_to_clip, m)?)?;
    m.add_function(wrap_pyfunction!(vjp, m)?)?;
    m.add_function(wrap_pyfunction!(jvp, m)?)?;
    m.add_function(wrap_pyfunction!(ece, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_class::<PyCalibModel>()?;
    Ok(())
}
