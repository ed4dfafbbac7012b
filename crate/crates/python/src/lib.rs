//! Python bindings: potentials, monitors, ensemble runs and the analysis
//! helpers, with plain lists and dicts at the boundary.

use adaptive_langevin::analysis::{self, Density1D, Estimator, DEFAULT_TOL};
use adaptive_langevin::monitor::{self, MonitorModel, Orientation, WellQuantity};
use adaptive_langevin::overdamped;
use adaptive_langevin::potentials::{self, PotentialModel};
use adaptive_langevin::scheme::SchemeStepper;
use adaptive_langevin::{run_ensemble, InitialCondition, Monitor as _, PhaseState, Potential as _, Psi, SamplerConfig, Scheme};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: adaptive_langevin::Error) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn check_dim(x: &[f64], dim: usize) -> PyResult<()> {
    if x.len() != dim {
        return Err(PyValueError::new_err(format!("expected a point of dimension {dim}, got {}", x.len())));
    }
    Ok(())
}

fn parse_scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(|_| PyValueError::new_err(format!("unknown scheme '{name}'")))
}

fn psi(m: f64, big_m: f64, r: f64, alpha: u32) -> PyResult<Psi> {
    if !(m > 0.0 && m <= big_m && big_m.is_finite() && r > 0.0 && alpha >= 1) {
        return Err(PyValueError::new_err("need 0 < m <= M < inf, r > 0 and alpha >= 1"));
    }
    Ok(Psi::new(m, big_m, r, alpha))
}

#[pyclass(frozen, name = "Potential")]
struct PyPotential(PotentialModel);

#[pymethods]
impl PyPotential {
    #[staticmethod]
    #[pyo3(signature = (k=1.0))]
    fn harmonic(k: f64) -> Self {
        Self(potentials::harmonic(k))
    }

    #[staticmethod]
    #[pyo3(signature = (a, b=0.1, c=0.1, x0=0.5))]
    fn modified_harmonic(a: f64, b: f64, c: f64, x0: f64) -> Self {
        Self(potentials::modified_harmonic(a, b, c, x0))
    }

    #[staticmethod]
    #[pyo3(signature = (y, k=4, a=2.0))]
    fn bayes_posterior(y: Vec<f64>, k: u32, a: f64) -> PyResult<Self> {
        if y.is_empty() {
            return Err(PyValueError::new_err("y must be non-empty"));
        }
        Ok(Self(potentials::bayes_posterior(y, k, a)))
    }

    #[staticmethod]
    #[pyo3(signature = (k1=0.1, k2=50.0, k3=50.0, k4=0.1))]
    fn two_pathway(k1: f64, k2: f64, k3: f64, k4: f64) -> Self {
        Self(potentials::two_pathway(k1, k2, k3, k4))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn id(&self) -> &'static str {
        self.0.id()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&x, self.0.dim())?;
        Ok(self.0.value(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&x, self.0.dim())?;
        let mut g = vec![0.0; x.len()];
        self.0.gradient(&x, &mut g);
        Ok(g)
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.0)
    }
}

#[pyclass(frozen, name = "Monitor")]
struct PyMonitor(MonitorModel);

#[pymethods]
impl PyMonitor {
    #[staticmethod]
    #[pyo3(signature = (c=1.0, dim=1))]
    fn constant(c: f64, dim: usize) -> PyResult<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(PyValueError::new_err("c must be positive"));
        }
        Ok(Self(monitor::constant_monitor(dim, c)))
    }

    /// `quantity` is one of "force", "omega_squared", "omega".
    #[staticmethod]
    #[pyo3(signature = (potential, quantity="omega", m=0.001, big_m=2.0, r=1.0, alpha=1))]
    fn well(potential: &PyPotential, quantity: &str, m: f64, big_m: f64, r: f64, alpha: u32) -> PyResult<Self> {
        let PotentialModel::ModifiedHarmonic(w) = &potential.0 else {
            return Err(PyValueError::new_err("well monitors need a modified_harmonic potential"));
        };
        let q = match quantity {
            "force" => WellQuantity::Force,
            "omega_squared" => WellQuantity::OmegaSquared,
            "omega" => WellQuantity::Omega,
            other => return Err(PyValueError::new_err(format!("unknown quantity '{other}'"))),
        };
        Ok(Self(monitor::monitor_well(w.clone(), q, psi(m, big_m, r, alpha)?)))
    }

    #[staticmethod]
    #[pyo3(signature = (potential, m=0.1, big_m=1.0, r=2.0, alpha=1))]
    fn bayes(potential: &PyPotential, m: f64, big_m: f64, r: f64, alpha: u32) -> PyResult<Self> {
        let PotentialModel::Bayes(b) = &potential.0 else {
            return Err(PyValueError::new_err("bayes monitors need a bayes_posterior potential"));
        };
        Ok(Self(monitor::monitor_bayes(b.y_mean(), b.a, psi(m, big_m, r, alpha)?)))
    }

    /// `orientation` is "reciprocal" or "direct".
    #[staticmethod]
    #[pyo3(signature = (orientation="reciprocal", m=0.2, big_m=1.0, r=1.0, alpha=1))]
    fn channel(orientation: &str, m: f64, big_m: f64, r: f64, alpha: u32) -> PyResult<Self> {
        let o = match orientation {
            "reciprocal" => Orientation::Reciprocal,
            "direct" => Orientation::Direct,
            other => return Err(PyValueError::new_err(format!("unknown orientation '{other}'"))),
        };
        Ok(Self(monitor::monitor_2d_channel(psi(m, big_m, r, alpha)?, o)))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn bounds(&self) -> (f64, f64) {
        self.0.bounds()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        check_dim(&x, self.0.dim())?;
        Ok(self.0.value(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        check_dim(&x, self.0.dim())?;
        let mut g = vec![0.0; x.len()];
        self.0.value_and_gradient(&x, &mut g);
        Ok(g)
    }
}

#[allow(clippy::too_many_arguments)]
fn sampler_config(h: f64, beta_inv: f64, t_final: f64, n_traj: u64, seed: u64, gamma: f64, fp_tol: f64, fp_max_iter: u32) -> PyResult<SamplerConfig> {
    let cfg = SamplerConfig { h, beta_inv, gamma, t_final, n_traj, seed, fp_tol, fp_max_iter, ..Default::default() };
    cfg.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(cfg)
}

/// `x0` fixes the start; `init_var > 0` draws `N(x0, init_var)` instead.
fn initial(x0: Option<Vec<f64>>, p0: Option<Vec<f64>>, init_var: f64, dim: usize) -> PyResult<InitialCondition> {
    let x = x0.unwrap_or_else(|| vec![0.0; dim]);
    check_dim(&x, dim)?;
    if init_var > 0.0 {
        return Ok(InitialCondition::Gaussian { mean: x, var: init_var });
    }
    Ok(InitialCondition::Fixed(match p0 {
        Some(p) => {
            check_dim(&p, dim)?;
            PhaseState::with_momentum(x, p)
        }
        None => PhaseState::position(x),
    }))
}

/// Runs an ensemble and returns the report as a dict, including the final
/// first coordinates of the trajectories that did not escape.
#[pyfunction]
#[pyo3(signature = (scheme, potential, monitor, h, beta_inv, t_final, n_traj, seed=0, gamma=1.0, x0=None, p0=None, init_var=0.0, fp_tol=1e-12, fp_max_iter=100))]
#[allow(clippy::too_many_arguments)]
fn sample<'py>(
    py: Python<'py>,
    scheme: &str,
    potential: &PyPotential,
    monitor: &PyMonitor,
    h: f64,
    beta_inv: f64,
    t_final: f64,
    n_traj: u64,
    seed: u64,
    gamma: f64,
    x0: Option<Vec<f64>>,
    p0: Option<Vec<f64>>,
    init_var: f64,
    fp_tol: f64,
    fp_max_iter: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = sampler_config(h, beta_inv, t_final, n_traj, seed, gamma, fp_tol, fp_max_iter)?;
    let init = initial(x0, p0, init_var, potential.0.dim())?;
    let stepper = SchemeStepper::new(parse_scheme(scheme)?, &potential.0, &monitor.0, &cfg).map_err(err)?;
    let out = py.detach(|| run_ensemble(&stepper, &cfg, &init)).map_err(err)?;
    let r = &out.report;
    let d = PyDict::new(py);
    d.set_item("n_traj", r.n_traj)?;
    d.set_item("escaped", r.escaped)?;
    d.set_item("mean_monitor", r.mean_monitor)?;
    d.set_item("fp_iters_mean", r.fp_iters_mean)?;
    d.set_item("fp_iters_max", r.fp_iters_max)?;
    d.set_item("wall_steps", r.wall_steps)?;
    d.set_item("moments", r.moments.clone())?;
    d.set_item("moment_stderr", r.moment_stderr.clone())?;
    d.set_item("time_avg_moments", r.time_avg_moments.clone())?;
    d.set_item("reweighted_moments", r.reweighted_moments.clone())?;
    d.set_item("final_x", out.final_positions())?;
    Ok(d)
}

/// Moments `E[x^k]`, `k = 1..=k_max`, of the Gibbs density by quadrature.
#[pyfunction]
#[pyo3(signature = (potential, beta_inv, support, k_max=4))]
fn gibbs_moments(potential: &PyPotential, beta_inv: f64, support: (f64, f64), k_max: usize) -> PyResult<Vec<f64>> {
    Ok(analysis::gibbs_reference(&potential.0, beta_inv, k_max, support).map_err(err)?.moments)
}

/// L1 distance between a histogram of `samples` and the Gibbs density.
#[pyfunction]
#[pyo3(signature = (samples, potential, beta_inv, support, bins=200, hist_support=None))]
fn histogram_l1(samples: Vec<f64>, potential: &PyPotential, beta_inv: f64, support: (f64, f64), bins: usize, hist_support: Option<(f64, f64)>) -> PyResult<f64> {
    let rho = Density1D::gibbs(potential.0.clone(), beta_inv, support, DEFAULT_TOL).map_err(err)?;
    analysis::histogram_l1(&samples, &rho, bins, hist_support.unwrap_or(support)).map_err(err)
}

/// Weak-error sweep over `hs` against quadrature moments. Returns
/// `(rows, slopes)` as lists of dicts.
#[pyfunction]
#[pyo3(signature = (schemes, hs, potential, monitor, beta_inv, t_final, n_traj, support, seed=0, gamma=1.0, x0=None, init_var=0.0, time_average=false))]
#[allow(clippy::too_many_arguments)]
fn weak_error_sweep<'py>(
    py: Python<'py>,
    schemes: Vec<String>,
    hs: Vec<f64>,
    potential: &PyPotential,
    monitor: &PyMonitor,
    beta_inv: f64,
    t_final: f64,
    n_traj: u64,
    support: (f64, f64),
    seed: u64,
    gamma: f64,
    x0: Option<Vec<f64>>,
    init_var: f64,
    time_average: bool,
) -> PyResult<(Vec<Bound<'py, PyDict>>, Vec<Bound<'py, PyDict>>)> {
    let schemes = schemes.iter().map(|s| parse_scheme(s)).collect::<PyResult<Vec<_>>>()?;
    let h0 = hs.first().copied().ok_or_else(|| PyValueError::new_err("hs must be non-empty"))?;
    let cfg = sampler_config(h0, beta_inv, t_final, n_traj, seed, gamma, 1e-12, 100)?;
    let init = initial(x0, None, init_var, potential.0.dim())?;
    let estimator = if time_average { Estimator::TimeAverage } else { Estimator::Final };
    let table = py
        .detach(|| {
            let reference = analysis::gibbs_reference(&potential.0, beta_inv, 4, support)?;
            analysis::weak_error_sweep(&schemes, &hs, &cfg, &potential.0, &monitor.0, &init, &reference, estimator)
        })
        .map_err(err)?;
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scheme", r.scheme.to_string())?;
            d.set_item("h", r.h)?;
            d.set_item("k", r.k)?;
            d.set_item("estimate", r.estimate)?;
            d.set_item("error", r.error)?;
            d.set_item("stderr", r.stderr)?;
            d.set_item("mean_monitor", r.mean_monitor)?;
            d.set_item("escaped", r.escaped)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    let slopes = table
        .slopes
        .iter()
        .map(|f| {
            let d = PyDict::new(py);
            d.set_item("scheme", f.scheme.to_string())?;
            d.set_item("k", f.k)?;
            d.set_item("slope", f.slope)?;
            d.set_item("r2", f.r2)?;
            d.set_item("points", f.points)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    Ok((rows, slopes))
}

/// Monitor design criteria on a grid over `domain`, as
/// `[(criterion, estimate, bound, pass)]`.
#[pyfunction]
#[pyo3(signature = (monitor, potential, domain, n_grid=201))]
fn audit(monitor: &PyMonitor, potential: &PyPotential, domain: Vec<(f64, f64)>, n_grid: usize) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let report = monitor::audit_criteria(&monitor.0, &potential.0, &domain, n_grid).map_err(err)?;
    Ok(report.rows.into_iter().map(|r| (r.criterion, r.estimate, r.bound, r.pass)).collect())
}

/// Stationarity residuals of the overdamped generators on a uniform grid:
/// a dict of `x`, `residual_ip` and `residual_naive`.
#[pyfunction]
#[pyo3(signature = (potential, monitor, beta_inv, grid, spacing=1e-3))]
fn adjoint_residual<'py>(py: Python<'py>, potential: &PyPotential, monitor: &PyMonitor, beta_inv: f64, grid: (f64, f64), spacing: f64) -> PyResult<Bound<'py, PyDict>> {
    let f = overdamped::adjoint_stationarity_audit(&potential.0, &monitor.0, beta_inv, grid, spacing).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sup_ip", f.sup_ip())?;
    d.set_item("x", f.x)?;
    d.set_item("residual_ip", f.residual_ip)?;
    d.set_item("residual_naive", f.residual_naive)?;
    Ok(d)
}

#[pyfunction]
fn schemes() -> Vec<String> {
    Scheme::ALL.iter().map(|s| s.to_string()).collect()
}

#[pymodule]
fn pyadalang(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_class::<PyMonitor>()?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_moments, m)?)?;
    m.add_function(wrap_pyfunction!(histogram_l1, m)?)?;
    m.add_function(wrap_pyfunction!(weak_error_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(adjoint_residual, m)?)?;
    m.add_function(wrap_pyfunction!(schemes, m)?)?;
    Ok(())
}
