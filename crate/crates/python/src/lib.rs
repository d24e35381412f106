//! Python bindings: fit models from event streams, read intensities, run the
//! simulators and compute the evaluation metrics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use app_core::eval::{self, GridSearchConfig};
use app_core::io::{self, ModelFormat};
use app_core::simulate::{self as sim, MixtureConfig, RateFunction};
use app_core::{Bandwidth, EstimatorConfig, FitConfig, FittedModel, Method, Subset};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

/// Per-process streams and per-subset truth curves.
type Sample = (Vec<Vec<f64>>, BTreeMap<String, Vec<f64>>);

/// Best `h`, best `M`, and `(h, M, score)` rows.
type GridOutcome = (f64, usize, Vec<(f64, usize, f64)>);

fn to_py(e: app_core::Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else if matches!(e, app_core::Error::Io(_)) {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn subset_of(indices: &[usize]) -> PyResult<Subset> {
    Subset::from_indices(indices).map_err(to_py)
}

fn bandwidth_of(h: Option<f64>) -> Bandwidth {
    h.map_or(Bandwidth::Scott, Bandwidth::Fixed)
}

/// A fitted log-linear intensity model.
#[pyclass(module = "app_python", frozen)]
struct Model {
    inner: FittedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Model {
            inner: io::load_model(&path).map_err(to_py)?,
        })
    }

    /// Writes the model as TOML (default) or JSON.
    #[pyo3(signature = (path, format = "toml"))]
    fn save(&self, path: PathBuf, format: &str) -> PyResult<()> {
        let f = ModelFormat::parse(format).map_err(to_py)?;
        io::save_model(&self.inner, &path, f).map_err(to_py)
    }

    /// Per-bin intensity (events per second) of the joint process of `subset`.
    fn intensity(&self, subset: Vec<usize>) -> PyResult<Vec<f64>> {
        let s = subset_of(&subset)?;
        Ok(self.inner.intensity(s).map_err(to_py)?.values)
    }

    /// Model probabilities over the sample space, in canonical state order.
    fn probabilities(&self) -> Vec<f64> {
        self.inner.distribution().mass().to_vec()
    }

    /// `θ` keyed by state, e.g. `"1,2:7"`.
    fn theta(&self) -> BTreeMap<String, f64> {
        self.inner.theta_map().into_iter().map(|(k, v)| (k.key(), v)).collect()
    }

    #[getter]
    fn dims(&self) -> usize {
        self.inner.space().dims()
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.space().bins()
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.space().duration()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn psi(&self) -> f64 {
        self.inner.params().psi()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.summary().iterations
    }

    #[getter]
    fn final_kl(&self) -> f64 {
        self.inner.summary().final_kl
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.summary().converged
    }

    fn count(&self, subset: Vec<usize>) -> PyResult<usize> {
        Ok(self.inner.count(subset_of(&subset)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(dims={}, bins={}, order={}, iterations={})",
            self.dims(),
            self.bins(),
            self.order(),
            self.iterations()
        )
    }
}

/// Fits a model to per-process event streams. `bandwidth=None` uses Scott's
/// rule per subset.
#[pyfunction]
#[pyo3(signature = (streams, duration, order, bins, bandwidth = None, window = 0.1, method = "natural", max_iters = None, tol = None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    streams: Vec<Vec<f64>>,
    duration: f64,
    order: usize,
    bins: usize,
    bandwidth: Option<f64>,
    window: f64,
    method: &str,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> PyResult<Model> {
    let data = eval::streams_to_data(streams, duration, window).map_err(to_py)?;
    let mut cfg = EstimatorConfig::new(order, bins, bandwidth_of(bandwidth));
    cfg.fit = FitConfig::for_method(Method::parse(method).map_err(to_py)?);
    if let Some(n) = max_iters {
        cfg.fit.max_iters = n;
    }
    if let Some(t) = tol {
        cfg.fit.tol = t;
    }
    let (inner, _, _) = FittedModel::fit(&data, &cfg).map_err(to_py)?;
    Ok(Model { inner })
}

/// Draws a sample. Returns `(streams, truth)` where `truth` maps subset keys
/// such as `"1,2"` to per-bin intensities.
#[pyfunction]
#[pyo3(signature = (kind, seed, duration, bins = 100, level = None, amplitude = None, frequency = None, dims = None, components = None, count = None, window = None, probability = None, step = None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    kind: &str,
    seed: u64,
    duration: f64,
    bins: usize,
    level: Option<f64>,
    amplitude: Option<f64>,
    frequency: Option<f64>,
    dims: Option<usize>,
    components: Option<usize>,
    count: Option<usize>,
    window: Option<f64>,
    probability: Option<f64>,
    step: Option<f64>,
) -> PyResult<Sample> {
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| PyValueError::new_err(format!("kind {kind:?} needs {name}")));
    let rate = |r: RateFunction| -> PyResult<_> {
        let g = sim::simulate_rate(r, duration, bins, seed).map_err(to_py)?;
        Ok((vec![g.points], keyed(g.truth)))
    };
    match kind {
        "constant" => rate(RateFunction::Constant {
            level: need("level", level)?,
        }),
        "sinusoidal" => rate(RateFunction::Sinusoidal {
            amplitude: need("amplitude", amplitude)?,
            frequency: need("frequency", frequency)?,
        }),
        "mixture" => {
            let d = dims.ok_or_else(|| PyValueError::new_err("kind \"mixture\" needs dims"))?;
            let k = components.ok_or_else(|| PyValueError::new_err("kind \"mixture\" needs components"))?;
            let n = count.ok_or_else(|| PyValueError::new_err("kind \"mixture\" needs count"))?;
            let mut cfg = MixtureConfig::new(d, k, n, duration);
            cfg.bins = bins;
            if let Some(w) = window {
                cfg.window = w;
            }
            let g = sim::mixture_generator(&cfg, seed).map_err(to_py)?;
            Ok((g.data.streams(), keyed(g.truth)))
        }
        "bernoulli" => {
            let ev = sim::bernoulli_toy(need("probability", probability)?, need("step", step)?, duration, seed)
                .map_err(to_py)?;
            Ok((vec![ev], BTreeMap::new()))
        }
        other => Err(PyValueError::new_err(format!(
            "unknown kind {other:?}; expected constant, sinusoidal, mixture or bernoulli"
        ))),
    }
}

fn keyed(truth: BTreeMap<Subset, Vec<f64>>) -> BTreeMap<String, Vec<f64>> {
    truth.into_iter().map(|(k, v)| (k.key(), v)).collect()
}

/// KL divergence from the normalized truth to the normalized estimate.
#[pyfunction]
fn kl_to_truth(estimated: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    eval::kl_to_truth(&estimated, &truth).map_err(to_py)
}

/// Negative log-likelihood of test event times under a per-bin intensity.
#[pyfunction]
fn negative_test_loglik(intensity: Vec<f64>, times: Vec<f64>, duration: f64) -> PyResult<f64> {
    eval::negative_test_loglik(&intensity, &times, duration).map_err(to_py)
}

/// Holdout grid search over `(h, M)`. Returns `(h, M, table)` with table rows
/// `(h, M, score)`.
#[pyfunction]
#[pyo3(signature = (streams, duration, h_grid, m_grid, order, holdout = 0.2, window = 0.1, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn grid_search(
    streams: Vec<Vec<f64>>,
    duration: f64,
    h_grid: Vec<f64>,
    m_grid: Vec<usize>,
    order: usize,
    holdout: f64,
    window: f64,
    seed: u64,
) -> PyResult<GridOutcome> {
    let (tr, va) = eval::split_streams(&streams, holdout, seed).map_err(to_py)?;
    let train = eval::streams_to_data(tr, duration, window).map_err(to_py)?;
    let val = eval::streams_to_data(va, duration, window).map_err(to_py)?;
    let res = eval::grid_search(&train, &val, &GridSearchConfig::new(h_grid, m_grid, order)).map_err(to_py)?;
    let table = res.table.iter().map(|c| (c.h, c.bins, c.score)).collect();
    Ok((res.best.h, res.best.bins, table))
}

#[pymodule]
fn app_python(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(kl_to_truth, m)?)?;
    m.add_function(wrap_pyfunction!(negative_test_loglik, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    Ok(())
}
