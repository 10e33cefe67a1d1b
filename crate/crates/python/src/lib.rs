//! Python module `griddy`: targets, the three chain samplers, the kernel lab
//! and the ECDF/ACF diagnostics.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use griddy_core::diagnostics::{self, Ecdf, GridStudyOptions};
use griddy_core::kernel::{self, PerturbationAnalysis, StateGrid};
use griddy_core::target::{self, StandardGaussian, TruncationSpec};
use griddy_core::{ChainConfig, ChainOutput, ClampSpec, Grid1D, InterpScheme, Norm, TargetDensity};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Round-trips a serializable value through JSON into Python objects.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_norm(p: f64) -> PyResult<Norm> {
    Norm::new(p).map_err(value_err)
}

/// A target density on a box.
#[pyclass(module = "griddy", frozen)]
struct Target {
    inner: Box<dyn TargetDensity>,
}

#[pymethods]
impl Target {
    /// The two-component Beta product mixture on [-1, 1]^2.
    #[staticmethod]
    fn beta_mixture() -> Self {
        Self {
            inner: Box::new(target::beta_mixture_2d()),
        }
    }

    /// Standard Gaussian truncated to [-t, t]^dim.
    #[staticmethod]
    #[pyo3(signature = (dim = 2, t = 5.0))]
    fn truncated_gaussian(dim: usize, t: f64) -> PyResult<Self> {
        let g = target::truncate(StandardGaussian { dim }, TruncationSpec::new(t)).map_err(value_err)?;
        Ok(Self { inner: Box::new(g) })
    }

    /// Posterior of a two-parameter model (`"linear"` or `"exp_decay"`)
    /// under unit Gaussian residuals on `(time, value)` pairs.
    #[staticmethod]
    fn residual(model: &str, data: Vec<(f64, f64)>, lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        let m = match model {
            "linear" => target::linear_model(),
            "exp_decay" => target::exp_decay_model(),
            other => return Err(value_err(format!("unknown model `{other}`"))),
        };
        let domain = target::BoxDomain::new(lower, upper).map_err(value_err)?;
        let t = target::residual_posterior(m, data, domain).map_err(value_err)?;
        Ok(Self { inner: Box::new(t) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn label(&self) -> &str {
        self.inner.label()
    }

    /// `(lower, upper)` corners of the domain.
    #[getter]
    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.inner.domain();
        (d.lower().to_vec(), d.upper().to_vec())
    }

    fn density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.density(&x).map_err(value_err)
    }

    /// Closed-form marginal CDF, or None.
    fn marginal_cdf(&self, axis: usize, t: f64) -> Option<f64> {
        self.inner.marginal_cdf(axis, t)
    }

    fn __repr__(&self) -> String {
        format!("Target({}, dim={})", self.inner.label(), self.inner.dim())
    }
}

/// Post burn-in samples and chain statistics.
#[pyclass(module = "griddy", frozen)]
struct Chain {
    out: ChainOutput,
}

#[pymethods]
impl Chain {
    #[getter]
    fn acceptance_rate(&self) -> f64 {
        self.out.acceptance_rate
    }

    #[getter]
    fn target_eval_count(&self) -> u64 {
        self.out.target_eval_count
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.out.seed
    }

    #[getter]
    fn dim(&self) -> usize {
        self.out.dim()
    }

    fn __len__(&self) -> usize {
        self.out.n_samples()
    }

    /// All rows as a list of lists.
    fn samples(&self) -> Vec<Vec<f64>> {
        self.out.rows().map(<[f64]>::to_vec).collect()
    }

    fn column(&self, axis: usize) -> PyResult<Vec<f64>> {
        if axis >= self.out.dim() {
            return Err(value_err(format!("axis {axis} out of range")));
        }
        Ok(self.out.column(axis))
    }

    /// Ergodic average of one coordinate.
    fn mean(&self, axis: usize) -> PyResult<f64> {
        griddy_core::estimate_expectation(&self.out, |x| x[axis]).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Chain(n={}, dim={}, acceptance_rate={:.4})",
            self.out.n_samples(),
            self.out.dim(),
            self.out.acceptance_rate
        )
    }
}

fn chain_config(
    t: &Target,
    n_steps: usize,
    seed: u64,
    burn_in: Option<usize>,
    initial: Option<Vec<f64>>,
) -> ChainConfig {
    let start = initial.unwrap_or_else(|| t.inner.domain().center());
    let cfg = ChainConfig::new(n_steps, seed, start);
    match burn_in {
        Some(b) => cfg.with_burn_in(b),
        None => cfg,
    }
}

fn grids(t: &Target, n: usize) -> PyResult<Vec<Grid1D>> {
    let d = t.inner.domain();
    (0..t.inner.dim())
        .map(|i| Grid1D::uniform(d.lower()[i], d.upper()[i], n).map_err(value_err))
        .collect()
}

fn clamp(clamp: bool, eps_rel: f64, m_rel: f64) -> PyResult<ClampSpec> {
    if clamp {
        ClampSpec::relative(eps_rel, m_rel).map_err(value_err)
    } else {
        Ok(ClampSpec::Disabled)
    }
}

fn scheme(s: &str) -> PyResult<InterpScheme> {
    s.parse().map_err(value_err)
}

/// Exact Gibbs chain (targets with closed-form conditionals only).
#[pyfunction]
#[pyo3(signature = (target, n_steps, seed, burn_in = None, initial = None))]
fn gibbs_chain(
    py: Python<'_>,
    target: &Target,
    n_steps: usize,
    seed: u64,
    burn_in: Option<usize>,
    initial: Option<Vec<f64>>,
) -> PyResult<Chain> {
    let cfg = chain_config(target, n_steps, seed, burn_in, initial);
    let out = py.detach(|| griddy_core::gibbs_chain(target.inner.as_ref(), &cfg));
    Ok(Chain {
        out: out.map_err(runtime_err)?,
    })
}

/// Griddy Gibbs chain with `n` equally spaced knots per axis.
#[pyfunction]
#[pyo3(signature = (target, n, n_steps, seed, scheme = "pl", clamp = true, eps_rel = 1e-8, m_rel = 10.0, burn_in = None, initial = None))]
#[allow(clippy::too_many_arguments)]
fn griddy_chain(
    py: Python<'_>,
    target: &Target,
    n: usize,
    n_steps: usize,
    seed: u64,
    scheme: &str,
    clamp: bool,
    eps_rel: f64,
    m_rel: f64,
    burn_in: Option<usize>,
    initial: Option<Vec<f64>>,
) -> PyResult<Chain> {
    let (g, s, c) = (
        grids(target, n)?,
        self::scheme(scheme)?,
        self::clamp(clamp, eps_rel, m_rel)?,
    );
    let cfg = chain_config(target, n_steps, seed, burn_in, initial);
    let out = py.detach(|| griddy_core::griddy_chain(target.inner.as_ref(), &g, s, c, &cfg));
    Ok(Chain {
        out: out.map_err(runtime_err)?,
    })
}

/// Griddy proposal with a Metropolis-Hastings correction.
#[pyfunction]
#[pyo3(signature = (target, n, n_steps, seed, scheme = "pl", clamp = true, eps_rel = 1e-8, m_rel = 10.0, burn_in = None, initial = None))]
#[allow(clippy::too_many_arguments)]
fn metropolized_griddy_chain(
    py: Python<'_>,
    target: &Target,
    n: usize,
    n_steps: usize,
    seed: u64,
    scheme: &str,
    clamp: bool,
    eps_rel: f64,
    m_rel: f64,
    burn_in: Option<usize>,
    initial: Option<Vec<f64>>,
) -> PyResult<Chain> {
    let (g, s, c) = (
        grids(target, n)?,
        self::scheme(scheme)?,
        self::clamp(clamp, eps_rel, m_rel)?,
    );
    let cfg = chain_config(target, n_steps, seed, burn_in, initial);
    let out = py.detach(|| griddy_core::metropolized_griddy_chain(target.inner.as_ref(), &g, s, c, &cfg));
    Ok(Chain {
        out: out.map_err(runtime_err)?,
    })
}

/// Compares the discretized Gibbs kernel with the griddy (or metropolized)
/// kernel on a `states^d` cell grid. Returns a dict with one report per norm,
/// the regularity check and the TV curve against its Doeblin envelope.
#[pyfunction]
#[pyo3(signature = (target, n, states = 16, scheme = "pl", kind = "griddy", p = vec![2.0, 4.0, f64::INFINITY], tv_steps = 50))]
#[allow(clippy::too_many_arguments)]
fn kernel_verify<'py>(
    py: Python<'py>,
    target: &Target,
    n: usize,
    states: usize,
    scheme: &str,
    kind: &str,
    p: Vec<f64>,
    tv_steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let t = target.inner.as_ref();
    let norms = p.into_iter().map(parse_norm).collect::<PyResult<Vec<_>>>()?;
    let sg = StateGrid::uniform(t.domain().clone(), states).map_err(value_err)?;
    let (g, s) = (grids(target, n)?, self::scheme(scheme)?);
    let metropolized = match kind {
        "griddy" => false,
        "metropolized" => true,
        other => return Err(value_err(format!("unknown kernel kind `{other}`"))),
    };
    let result = py.detach(|| -> Result<_, griddy_core::Error> {
        let kp = kernel::discretize_gibbs_kernel(t, &sg)?;
        let kq = if metropolized {
            kernel::discretize_metropolized_kernel(t, &sg, &g, s, ClampSpec::default())?
        } else {
            kernel::discretize_griddy_kernel(t, &sg, &g, s, ClampSpec::default())?
        };
        let a = PerturbationAnalysis::new(&kp, &kq)?;
        let reports: Vec<_> = norms.iter().map(|&q| a.report(q)).collect();
        let regularity = kernel::regularity_check(&kq, &a.eta_hat);
        let curve = kernel::tv_curve(&kq, &a.eta_hat, tv_steps);
        let envelope = kernel::doeblin_envelope(a.doeblin_q, kq.cell_volume(), tv_steps);
        Ok((
            reports,
            regularity,
            curve,
            envelope,
            a.pi_hat.density,
            a.eta_hat.density,
        ))
    });
    let (reports, regularity, curve, envelope, pi, eta) = result.map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("reports", to_py(py, &reports)?)?;
    d.set_item("regularity", to_py(py, &regularity)?)?;
    d.set_item("tv_curve", curve)?;
    d.set_item("tv_envelope", envelope)?;
    d.set_item("pi_hat", pi)?;
    d.set_item("eta_hat", eta)?;
    Ok(d)
}

/// ECDF error of the griddy chain against the closed-form marginal CDF for
/// each knot count. Returns the study as a dict.
#[pyfunction]
#[pyo3(signature = (target, ns, n_steps, seed, scheme = "pl", replicates = 1))]
fn grid_study<'py>(
    py: Python<'py>,
    target: &Target,
    ns: Vec<usize>,
    n_steps: usize,
    seed: u64,
    scheme: &str,
    replicates: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut opts = GridStudyOptions::new(ns, n_steps, seed);
    opts.scheme = self::scheme(scheme)?;
    opts.replicates = replicates;
    let study = py.detach(|| diagnostics::grid_convergence_study(target.inner.as_ref(), &opts));
    to_py(py, &study.map_err(runtime_err)?)
}

/// Distance between the ECDF of `samples` and the target's marginal CDF.
#[pyfunction]
#[pyo3(signature = (target, samples, axis = 0, p = f64::INFINITY, probe_count = 1000))]
fn marginal_ecdf_error(target: &Target, samples: Vec<f64>, axis: usize, p: f64, probe_count: usize) -> PyResult<f64> {
    let t = target.inner.as_ref();
    if axis >= t.dim() || t.marginal_cdf(axis, t.domain().center()[axis]).is_none() {
        return Err(value_err("target has no closed-form marginal CDF on this axis"));
    }
    let e = Ecdf::new(&samples).map_err(value_err)?;
    let support = (t.domain().lower()[axis], t.domain().upper()[axis]);
    let reference = |x: f64| t.marginal_cdf(axis, x).unwrap_or(f64::NAN);
    diagnostics::cdf_distance(&e, reference, parse_norm(p)?, probe_count, support).map_err(value_err)
}

/// Distance between two ECDFs on `support`.
#[pyfunction]
#[pyo3(signature = (a, b, support, p = f64::INFINITY, probe_count = 1000))]
fn ecdf_distance(a: Vec<f64>, b: Vec<f64>, support: (f64, f64), p: f64, probe_count: usize) -> PyResult<f64> {
    let (ea, eb) = (Ecdf::new(&a).map_err(value_err)?, Ecdf::new(&b).map_err(value_err)?);
    diagnostics::ecdf_distance(&ea, &eb, parse_norm(p)?, probe_count, support).map_err(value_err)
}

/// `(coefficients, iat)` for lags `0..=max_lag`.
#[pyfunction]
fn autocorrelation(series: Vec<f64>, max_lag: usize) -> PyResult<(Vec<f64>, f64)> {
    let a = diagnostics::autocorrelation_series(&series, max_lag).map_err(value_err)?;
    Ok((a.coefficients, a.iat))
}

#[pymodule]
fn griddy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BETA_MIXTURE_MEAN", target::BETA_MIXTURE_MEAN)?;
    m.add_class::<Target>()?;
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(gibbs_chain, m)?)?;
    m.add_function(wrap_pyfunction!(griddy_chain, m)?)?;
    m.add_function(wrap_pyfunction!(metropolized_griddy_chain, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_verify, m)?)?;
    m.add_function(wrap_pyfunction!(grid_study, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_ecdf_error, m)?)?;
    m.add_function(wrap_pyfunction!(ecdf_distance, m)?)?;
    m.add_function(wrap_pyfunction!(autocorrelation, m)?)?;
    Ok(())
}
