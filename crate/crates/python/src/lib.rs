//! Python bindings: operators, phantoms, the learned regularizer, NETT
//! reconstruction and the experiment commands.

use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nett_core::harness::{self, RunConfig};
use nett_core::linops::{self, ForwardOperator};
use nett_core::regularizer::{Architecture, NetParams, NettRegularizer, Regularizer, TVParams};
use nett_core::solver::{self, Init, SolveConfig};
use nett_core::theory::{rate_experiment, ToyProblem};
use nett_core::{phantom, NettError};

fn py_err(e: NettError) -> PyErr {
    match e {
        NettError::MissingArtifact(_) => PyFileNotFoundError::new_err(e.to_string()),
        e if e.is_config_error() => PyValueError::new_err(e.to_string()),
        NettError::DimensionMismatch { .. } | NettError::InsufficientPoints { .. } => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Truncated-SVD forward operator.
#[pyclass(name = "Operator", module = "nett", frozen)]
struct PyOperator {
    inner: ForwardOperator,
}

#[pymethods]
impl PyOperator {
    /// Masked PAT operator with default blob shape and relative truncation.
    #[staticmethod]
    #[pyo3(signature = (n, sensors=48, times=64, mask_width=0.34))]
    fn pat(n: usize, sensors: usize, times: usize, mask_width: f64) -> PyResult<Self> {
        let setup = nett_core::pat::PatSetup::standard(n, sensors, times, mask_width).map_err(py_err)?;
        Ok(Self {
            inner: setup.build().map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ForwardOperator::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma().to_vec()
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        linops::apply(&self.inner, &x).map_err(py_err)
    }

    fn adjoint(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        linops::apply_adjoint(&self.inner, &y).map_err(py_err)
    }

    fn pinv(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        linops::pseudo_inverse_apply(&self.inner, &y).map_err(py_err)
    }
}

/// `R(x) = ||x - Phi(x)||^2 + beta TV_eps(x)`.
#[pyclass(name = "Regularizer", module = "nett", frozen)]
struct PyRegularizer {
    inner: NettRegularizer,
}

#[pymethods]
impl PyRegularizer {
    /// Loads network weights; `path=None` gives the identity network.
    #[new]
    #[pyo3(signature = (side, path=None, beta=15.0, epsilon=1e-3))]
    fn new(side: usize, path: Option<PathBuf>, beta: f64, epsilon: f64) -> PyResult<Self> {
        let theta = match path {
            Some(p) => NetParams::load(p).map_err(py_err)?,
            None => NetParams::zeros(Architecture::standard()),
        };
        let tv = TVParams::new(beta, epsilon).map_err(py_err)?;
        Ok(Self {
            inner: NettRegularizer::new(theta, tv, side).map_err(py_err)?,
        })
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&x).map_err(py_err)
    }

    fn grad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad(&x).map_err(py_err)
    }

    fn phi(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.phi(&x).map_err(py_err)
    }
}

#[pyfunction]
fn ring_phantom(n: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(phantom::gen_ring_phantom(n, seed).map_err(py_err)?.image)
}

#[pyfunction]
fn circles_phantom(n: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(phantom::gen_circles_phantom(n, seed).map_err(py_err)?.image)
}

/// `A x` plus Gaussian noise of standard deviation `sigma ||A x||_inf`.
#[pyfunction]
fn simulate_data(op: &PyOperator, x: Vec<f64>, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
    phantom::simulate_data(&op.inner, &x, sigma, seed).map_err(py_err)
}

/// NETT reconstruction; returns the image and the objective per iteration.
#[pyfunction]
#[pyo3(signature = (op, y, reg, alpha=0.015, s=0.25, n_iter=15, init="net_adjoint", paper_sign=false))]
#[allow(clippy::too_many_arguments)]
fn reconstruct(
    op: &PyOperator,
    y: Vec<f64>,
    reg: &PyRegularizer,
    alpha: f64,
    s: f64,
    n_iter: usize,
    init: &str,
    paper_sign: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let init = match init {
        "net_adjoint" => Init::NetAdjoint,
        "pseudo_inverse" => Init::PseudoInverse,
        "zero" => Init::Zero,
        other => return Err(PyValueError::new_err(format!("unknown init '{other}'"))),
    };
    let config = SolveConfig {
        alpha,
        s,
        n_iter,
        init,
        paper_sign,
        tolerance: None,
    };
    let report = solver::nett_reconstruct(&op.inner, &y, &reg.inner, &config).map_err(py_err)?;
    let objective = report.objective.iter().map(|o| o.total).collect();
    Ok((report.image, objective))
}

/// `Phi(A^+ y)`.
#[pyfunction]
fn postprocess(op: &PyOperator, y: Vec<f64>, reg: &PyRegularizer) -> PyResult<Vec<f64>> {
    solver::postprocess_reconstruct(&op.inner, &y, &reg.inner).map_err(py_err)
}

/// Fitted Bregman-distance slope of the source-condition toy problem.
#[pyfunction]
#[pyo3(signature = (deltas, dim=100, sigma_min=1e-4, trials=20, c=0.1, seed=0))]
fn rate_slope(deltas: Vec<f64>, dim: usize, sigma_min: f64, trials: usize, c: f64, seed: u64) -> PyResult<f64> {
    let toy = ToyProblem::source_condition(dim, sigma_min, 1.0, seed).map_err(py_err)?;
    Ok(rate_experiment(&toy, &deltas, trials, c, seed).map_err(py_err)?.slope)
}

/// Runs one CLI command (`build-operator`, `gen-phantoms`, ...) with the
/// given config file, or defaults when `config` is None.
#[pyfunction]
#[pyo3(signature = (command, config=None, out=None))]
fn run_command(command: &str, config: Option<PathBuf>, out: Option<PathBuf>) -> PyResult<()> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p).map_err(py_err)?,
        None => RunConfig::default(),
    };
    if let Some(out) = out {
        cfg.out = out;
    }
    match command {
        "build-operator" => harness::cmd_build_operator(&cfg).map(drop),
        "gen-phantoms" => harness::cmd_gen_phantoms(&cfg).map(drop),
        "train" => harness::cmd_train(&cfg).map(drop),
        "reconstruct" => harness::cmd_reconstruct(&cfg).map(drop),
        "noise-sweep" => harness::cmd_noise_sweep(&cfg).map(drop),
        "ood-compare" => harness::cmd_ood_compare(&cfg).map(drop),
        "rate-study" => harness::cmd_rate_study(&cfg).map(drop),
        other => return Err(PyValueError::new_err(format!("unknown command '{other}'"))),
    }
    .map_err(py_err)
}

#[pymodule]
fn nett(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOperator>()?;
    m.add_class::<PyRegularizer>()?;
    m.add_function(wrap_pyfunction!(ring_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(circles_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_data, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(postprocess, m)?)?;
    m.add_function(wrap_pyfunction!(rate_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
