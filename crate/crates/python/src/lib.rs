//! Python bindings: `import pyicgn`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use icgn::autodiff::Activation;
use icgn::harness::{self, CheckOptions, TrainConfig, Trainable};
use icgn::integrator::{closed_form_convexifier, icgn_forward, ConvexGradientModel, Mode};
use icgn::models::{deserialize_model, serialize_model, Icnn as CoreIcnn, Icnn1, Icnn2, Model, OneLayerMap, Parameterized};
use icgn::numeric::{Matrix, RngStream};
use icgn::verify;

fn err(e: icgn::Error) -> PyErr {
    match e {
        icgn::Error::Divergence { .. } | icgn::Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Convex gradient network with a one-layer (or, unconstrained, deep) hidden map.
#[pyclass(name = "Icgn", skip_from_py_object)]
#[derive(Clone)]
struct PyIcgn {
    inner: ConvexGradientModel,
}

#[pymethods]
impl PyIcgn {
    #[new]
    #[pyo3(signature = (input_dim = 2, width = 5, activation = "tanh", seed = 0))]
    fn new(input_dim: usize, width: usize, activation: &str, seed: u64) -> PyResult<Self> {
        let act = Activation::builtin(activation).map_err(err)?;
        if input_dim == 0 || width == 0 {
            return Err(PyValueError::new_err("input_dim and width must be positive"));
        }
        let map = OneLayerMap::init(input_dim, width, act, &mut RngStream::new(seed));
        Ok(PyIcgn {
            inner: ConvexGradientModel::with_defaults(map.into()),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match deserialize_model(text).map_err(err)? {
            Model::Icgn(inner) => Ok(PyIcgn { inner }),
            _ => Err(PyValueError::new_err("document is not an icgn model")),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serialize_model(&Model::Icgn(self.inner.clone())).map_err(err)
    }

    /// Output at `x`; `seed` switches to the stochastic training estimate.
    #[pyo3(signature = (x, seed = None))]
    fn __call__(&self, x: Vec<f64>, seed: Option<u64>) -> PyResult<Vec<f64>> {
        let out = match seed {
            None => icgn_forward(&self.inner, &x, Mode::Eval, None),
            Some(s) => icgn_forward(&self.inner, &x, Mode::Train, Some(&mut RngStream::new(s))),
        };
        out.map(|v| v.into_vec()).map_err(err)
    }

    /// Closed-form output (one-layer maps with an invertible activation only).
    fn closed_form(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let map = self
            .inner
            .hidden()
            .as_one_layer()
            .ok_or_else(|| PyValueError::new_err("closed form needs a one-layer hidden map"))?;
        closed_form_convexifier(map, &x).map(|v| v.into_vec()).map_err(err)
    }

    /// Central-difference Jacobian of the output, as a list of rows.
    #[pyo3(signature = (x, step = 1e-4))]
    fn jacobian(&self, x: Vec<f64>, step: f64) -> PyResult<Vec<Vec<f64>>> {
        let j = verify::fd_jacobian(|y| icgn_forward(&self.inner, y, Mode::Eval, None), &x, step).map_err(err)?;
        Ok(rows(&j))
    }

    /// Largest defect of the hidden map's integrability condition at `x`.
    fn pde_residual(&self, x: Vec<f64>) -> PyResult<f64> {
        verify::pde_residual(self.inner.hidden(), &x).map(|r| r.residual).map_err(err)
    }

    /// Every verification suite; returns the JSON report.
    #[pyo3(signature = (points = 20, seed = 0, estimator_seeds = 500))]
    fn check(&self, points: usize, seed: u64, estimator_seeds: u64) -> PyResult<String> {
        let opts = CheckOptions {
            points,
            seed,
            estimator_seeds,
            ..CheckOptions::default()
        };
        harness::run_checks(&self.inner, &opts).and_then(|r| r.to_json()).map_err(err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn constrained(&self) -> bool {
        self.inner.constrained()
    }

    fn __repr__(&self) -> String {
        format!("Icgn(input_dim={}, params={})", self.inner.dim(), self.inner.param_count())
    }
}

/// Input convex neural network baseline; `kind` is `"icnn1"` or `"icnn2"`.
#[pyclass(name = "Icnn", skip_from_py_object)]
#[derive(Clone)]
struct PyIcnn {
    inner: CoreIcnn,
}

#[pymethods]
impl PyIcnn {
    #[new]
    #[pyo3(signature = (kind = "icnn1", input_dim = 2, hidden = 25, seed = 0, learn_output_weights = false))]
    fn new(kind: &str, input_dim: usize, hidden: usize, seed: u64, learn_output_weights: bool) -> PyResult<Self> {
        let mut rng = RngStream::new(seed);
        let inner = match kind {
            "icnn1" => CoreIcnn::One(Icnn1::init(input_dim, hidden, learn_output_weights, &mut rng)),
            "icnn2" => CoreIcnn::Two(Icnn2::init(input_dim, hidden, hidden, learn_output_weights, &mut rng)),
            other => return Err(PyValueError::new_err(format!("unknown ICNN kind `{other}`"))),
        };
        Ok(PyIcnn { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match deserialize_model(text).map_err(err)? {
            Model::Icnn(inner) => Ok(PyIcnn { inner }),
            _ => Err(PyValueError::new_err("document is not an icnn model")),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serialize_model(&Model::Icnn(self.inner.clone())).map_err(err)
    }

    /// Gradient of the convex potential at `x`.
    fn __call__(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_map(&x).map(|v| v.into_vec()).map_err(err)
    }

    fn potential(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.potential(&x).map_err(err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn __repr__(&self) -> String {
        format!("Icnn(params={})", self.inner.param_count())
    }
}

/// Trains from a JSON config; returns `(metrics_json, model)`.
#[pyfunction]
#[pyo3(signature = (config = "{}", allow_unconstrained = false))]
fn train(py: Python<'_>, config: &str, allow_unconstrained: bool) -> PyResult<(String, Py<PyAny>)> {
    let cfg = TrainConfig::from_json(config).map_err(err)?;
    let outcome = harness::train(&cfg, allow_unconstrained).map_err(err)?;
    let metrics = outcome.metrics.to_json().map_err(err)?;
    let model = match outcome.model {
        Trainable::Icgn(inner) => Py::new(py, PyIcgn { inner })?.into_any(),
        Trainable::Icnn(inner) => Py::new(py, PyIcnn { inner })?.into_any(),
    };
    Ok((metrics, model))
}

/// The fitting target `(4x³ + y/2 + x, 3y − y² + x/2)`.
#[pyfunction]
fn target(x: Vec<f64>) -> PyResult<Vec<f64>> {
    harness::target_eval(&x).map(|v| v.into_vec()).map_err(err)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[pyfunction]
fn gauss_legendre(n: usize) -> PyResult<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(PyValueError::new_err("need at least one node"));
    }
    Ok(icgn::integrator::gauss_legendre(n))
}

#[pymodule]
fn pyicgn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIcgn>()?;
    m.add_class::<PyIcnn>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(target, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    Ok(())
}
