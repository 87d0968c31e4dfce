//! Python bindings: parameters, relaxation functions, subordinator paths,
//! the series, subordination and Monte Carlo solvers, and the validation suite.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tfd_core::mc_solver::{estimate_u_detailed, McConfig, TimeChange};
use tfd_core::pde_series::{self, IntervalDomain};
use tfd_core::special_fn;
use tfd_core::subordinator::{self, SubordinatorPath};
use tfd_core::validate::{self, Profile};
use tfd_core::RelaxationQuery;

fn py_err(e: tfd_core::Error) -> PyErr {
    match e {
        tfd_core::Error::InvalidParameter { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for tfd_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Tempered stable subordinator parameters `0 < β < 1`, `λ ≥ 0`.
#[pyclass(name = "TemperedParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyParams(tfd_core::TemperedParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (beta, lambda_=0.0))]
    fn new(beta: f64, lambda_: f64) -> PyResult<Self> {
        tfd_core::TemperedParams::new(beta, lambda_).py().map(Self)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda()
    }

    fn lambda_pow_beta(&self) -> f64 {
        self.0.lambda_pow_beta()
    }

    /// `ψ_λ(s) = (s + λ)^β − λ^β`.
    fn laplace_symbol(&self, s: f64) -> PyResult<f64> {
        special_fn::laplace_symbol(&self.0, s).py()
    }

    fn __repr__(&self) -> String {
        format!("TemperedParams(beta={}, lambda_={})", self.0.beta(), self.0.lambda())
    }
}

/// `ǧ_λ(t, μ)`.
#[pyfunction]
fn relaxation(params: PyParams, mu: f64, t: f64) -> PyResult<f64> {
    special_fn::relaxation(&RelaxationQuery::new(params.0, mu, t).py()?).py()
}

/// `∂_t ǧ_λ(t, μ)` for `t > 0`.
#[pyfunction]
fn relaxation_dt(params: PyParams, mu: f64, t: f64) -> PyResult<f64> {
    special_fn::relaxation_dt(&RelaxationQuery::new(params.0, mu, t).py()?).py()
}

/// `k(t)` in the bound `|∂_t ǧ| ≤ μ k(t)`.
#[pyfunction]
fn kernel_bound(params: PyParams, t: f64) -> PyResult<f64> {
    special_fn::kernel_bound(&params.0, t).py()
}

/// `E_β(z)` for real `z ≤ 0`.
#[pyfunction]
fn mittag_leffler(beta: f64, z: f64) -> PyResult<f64> {
    special_fn::mittag_leffler(beta, z).py()
}

/// Density `g_λ(t, x)` of the inverse subordinator `E_λ(t)`.
#[pyfunction]
fn inverse_density(params: PyParams, t: f64, x: f64) -> PyResult<f64> {
    subordinator::inverse_density_quadrature(&params.0, t, x).py()
}

/// One tempered stable increment `D_λ(dx)` per stream index.
#[pyfunction]
#[pyo3(signature = (params, dx, n, seed=0))]
fn sample_increments(py: Python<'_>, params: PyParams, dx: f64, n: u64, seed: u64) -> PyResult<Vec<f64>> {
    py.detach(|| {
        let sampler = subordinator::TemperedSampler::new(params.0, dx)?;
        let mut rng = tfd_core::rng::stream_rng(seed, 0, tfd_core::rng::StreamRole::Auxiliary);
        let mut stats = subordinator::RejectionStats::default();
        (0..n)
            .map(|_| sampler.sample(&mut rng, &mut stats))
            .collect::<tfd_core::Result<Vec<_>>>()
    })
    .py()
}

/// A simulated subordinator path on the grid `x_k = k·dx`.
#[pyclass(name = "SubordinatorPath", frozen)]
struct PyPath(SubordinatorPath);

#[pymethods]
impl PyPath {
    #[new]
    #[pyo3(signature = (params, dx, t_horizon, seed=0, path_index=0))]
    fn new(py: Python<'_>, params: PyParams, dx: f64, t_horizon: f64, seed: u64, path_index: u64) -> PyResult<Self> {
        py.detach(|| subordinator::build_path(&params.0, dx, t_horizon, seed, path_index))
            .py()
            .map(Self)
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx
    }

    /// `D_λ(x_k)` for `k = 0, 1, …`.
    #[getter]
    fn levels(&self) -> Vec<f64> {
        self.0.levels.clone()
    }

    #[getter]
    fn acceptance_rate(&self) -> f64 {
        self.0.stats.acceptance_rate()
    }

    /// `(e_lower, e_upper)` bracketing `E_λ(t)`.
    fn inverse_at(&self, t: f64) -> PyResult<(f64, f64)> {
        let s = self.0.inverse_at(t).py()?;
        Ok((s.e_lower, s.e_upper))
    }
}

/// `(0, M_1) × … × (0, M_d)`, `d ≤ 3`.
#[pyclass(name = "IntervalDomain", frozen, from_py_object)]
#[derive(Clone)]
struct PyDomain(IntervalDomain);

#[pymethods]
impl PyDomain {
    #[new]
    fn new(lengths: Vec<f64>) -> PyResult<Self> {
        IntervalDomain::boxed(&lengths).py().map(Self)
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.0.lengths().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("IntervalDomain({:?})", self.0.lengths())
    }
}

/// Dirichlet eigenfunction coefficients of an initial datum.
#[pyclass(name = "EigenExpansion", frozen)]
struct PyExpansion(pde_series::EigenExpansion);

#[pymethods]
impl PyExpansion {
    /// Coefficients in row-major mode order, `n_max` modes per axis.
    #[staticmethod]
    fn from_coefficients(domain: PyDomain, n_max: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        pde_series::EigenExpansion::from_coeffs(domain.0, n_max, coeffs)
            .py()
            .map(Self)
    }

    /// Projects a callable `f(x: list[float]) -> float`. Without `n_max` the
    /// mode count doubles from 64 until the tail is negligible.
    #[staticmethod]
    #[pyo3(signature = (domain, f, n_max=None))]
    fn project(py: Python<'_>, domain: PyDomain, f: Py<PyAny>, n_max: Option<usize>) -> PyResult<Self> {
        let failure = std::sync::Mutex::new(None);
        let call = |x: &[f64]| {
            Python::attach(
                |py| match f.call1(py, (x.to_vec(),)).and_then(|v| v.extract::<f64>(py)) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        f64::NAN
                    }
                },
            )
        };
        let out = py.detach(|| match n_max {
            Some(n) => pde_series::project(call, &domain.0, n),
            None => pde_series::project_adaptive(call, &domain.0),
        });
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        out.py().map(Self)
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.0.n_max
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.coeffs.clone()
    }

    #[getter]
    fn parseval_defect(&self) -> Option<f64> {
        self.0.parseval_defect
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.evaluate(&x).py()
    }

    /// Coefficients `ǧ_λ(t, η_n) f̄(n)` of the solution at time `t`.
    fn evolve(&self, params: PyParams, t: f64) -> PyResult<Self> {
        pde_series::tempered_coefficients(&self.0, &params.0, t).py().map(Self)
    }

    /// Series solution `u(t, x)` and its truncation estimate.
    fn solve_series(&self, params: PyParams, t: f64, x: Vec<f64>) -> PyResult<(f64, Option<f64>)> {
        let e = pde_series::tempered_solution_series(&self.0, &params.0, t, &x).py()?;
        Ok((e.value, e.truncation_error))
    }

    /// `u(t, x)` by quadrature over the inverse-subordinator density.
    fn solve_subordination(&self, py: Python<'_>, params: PyParams, t: f64, x: Vec<f64>) -> PyResult<f64> {
        py.detach(|| pde_series::tempered_solution_subordination(&self.0, &params.0, t, &x))
            .py()
            .map(|e| e.value)
    }

    /// Monte Carlo `u(t, x)` and its standard error. `params=None` uses the
    /// identity clock, i.e. the classical heat equation.
    #[pyo3(signature = (params, t, x, n_paths=100_000, dx=1e-3, ds=1e-4, seed=0, bridge_correction=true))]
    #[allow(clippy::too_many_arguments)]
    fn solve_monte_carlo(
        &self,
        py: Python<'_>,
        params: Option<PyParams>,
        t: f64,
        x: Vec<f64>,
        n_paths: u64,
        dx: f64,
        ds: f64,
        seed: u64,
        bridge_correction: bool,
    ) -> PyResult<(f64, f64)> {
        let cfg = McConfig {
            n_paths,
            dx_subordinator: dx,
            ds_diffusion: ds,
            seed,
            bridge_correction,
        };
        let clock = params.map_or(TimeChange::Identity, |p| TimeChange::Inverse(p.0));
        let exp = &self.0;
        let report = py
            .detach(|| estimate_u_detailed(|y| exp.evaluate(y).unwrap_or(0.0), &x, t, clock, &exp.domain, &cfg))
            .py()?;
        Ok((report.estimate.value, report.estimate.std_error.unwrap_or(0.0)))
    }
}

/// Runs the validation suite and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (profile="fast", seed=0))]
fn run_validation(py: Python<'_>, profile: &str, seed: u64) -> PyResult<String> {
    let profile: Profile = profile.parse().map_err(py_err)?;
    let report = py.detach(|| validate::run_validation(profile, seed));
    serde_json::to_string_pretty(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn tfd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyPath>()?;
    m.add_class::<PyDomain>()?;
    m.add_class::<PyExpansion>()?;
    m.add_function(wrap_pyfunction!(relaxation, m)?)?;
    m.add_function(wrap_pyfunction!(relaxation_dt, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mittag_leffler, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_density, m)?)?;
    m.add_function(wrap_pyfunction!(sample_increments, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    Ok(())
}
