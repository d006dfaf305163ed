//! Python bindings for the `seqattack` crate.
//!
//! ```python
//! import seqattack as sa
//! src = sa.SourceParams(0.16)
//! policy = sa.BlockPolicy(5, 0.5, 0.8, min_run=3)
//! sa.metrics(src, sa.Strategy.usd(), policy).gain
//! ```

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use seqattack::block_analytics;
use seqattack::cli_io::csv as frontier_io;
use seqattack::frontier::{self, ExperimentPoint, MuBetaOutcome, MuBetaSearch, StrategyFamily, SweepConfig};
use seqattack::sim;
use seqattack::verify::{run_verification, VerifySweep};
use seqattack::{AttackMetrics, BlockPolicy, ModelError, SourceParams, Strategy, StrategyKind};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn model<T>(r: Result<T, ModelError>) -> PyResult<T> {
    r.map_err(value_error)
}

#[pyclass(name = "SourceParams", frozen, skip_from_py_object, module = "seqattack")]
#[derive(Clone, Copy)]
struct PySourceParams(SourceParams);

#[pymethods]
impl PySourceParams {
    #[new]
    fn new(mu_alpha: f64) -> PyResult<Self> {
        Ok(Self(model(SourceParams::new(mu_alpha))?))
    }

    #[getter]
    fn mu_alpha(&self) -> f64 {
        self.0.mu_alpha
    }

    /// `(b/a, 1)`, the admissible filter strengths.
    fn lambda_interval(&self) -> (f64, f64) {
        seqattack::signal_model::lambda_interval(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("SourceParams(mu_alpha={})", self.0.mu_alpha)
    }
}

#[pyclass(name = "Strategy", frozen, skip_from_py_object, module = "seqattack")]
#[derive(Clone, Copy)]
struct PyStrategy(Strategy);

#[pymethods]
impl PyStrategy {
    #[staticmethod]
    fn usd() -> Self {
        Self(Strategy::Usd)
    }

    #[staticmethod]
    fn bob_device() -> Self {
        Self(Strategy::BobDevice)
    }

    #[staticmethod]
    fn med(lambda_: f64) -> Self {
        Self(Strategy::Med { lambda: lambda_ })
    }

    /// MED at `fraction` of the way from `b/a` to 1.
    #[staticmethod]
    fn med_fraction(src: &PySourceParams, fraction: f64) -> PyResult<Self> {
        Ok(Self(model(Strategy::med_at_fraction(&src.0, fraction))?))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }

    #[getter]
    fn lambda_(&self) -> Option<f64> {
        self.0.lambda()
    }

    fn __repr__(&self) -> String {
        match self.0 {
            Strategy::Med { lambda } => format!("Strategy.med({lambda})"),
            s => format!("Strategy.{}()", s.kind()),
        }
    }
}

#[pyclass(name = "BlockPolicy", frozen, skip_from_py_object, module = "seqattack")]
#[derive(Clone, Copy)]
struct PyBlockPolicy(BlockPolicy);

#[pymethods]
impl PyBlockPolicy {
    #[new]
    #[pyo3(signature = (block_len, send_prob, mu_beta, min_run=None))]
    fn new(block_len: usize, send_prob: f64, mu_beta: f64, min_run: Option<usize>) -> PyResult<Self> {
        let min_run = min_run.unwrap_or_else(|| block_analytics::default_min_run(block_len));
        Ok(Self(model(BlockPolicy::new(block_len, min_run, send_prob, mu_beta))?))
    }

    #[getter]
    fn block_len(&self) -> usize {
        self.0.block_len
    }

    #[getter]
    fn min_run(&self) -> usize {
        self.0.min_run
    }

    #[getter]
    fn send_prob(&self) -> f64 {
        self.0.send_prob
    }

    #[getter]
    fn mu_beta(&self) -> f64 {
        self.0.mu_beta
    }

    fn __repr__(&self) -> String {
        let p = self.0;
        format!(
            "BlockPolicy(block_len={}, send_prob={}, mu_beta={}, min_run={})",
            p.block_len, p.send_prob, p.mu_beta, p.min_run
        )
    }
}

/// Gain, QBER (None when there are no clicks) and double-click rate.
#[pyclass(name = "AttackMetrics", frozen, skip_from_py_object, get_all, module = "seqattack")]
#[derive(Clone, Copy)]
struct PyAttackMetrics {
    gain: f64,
    qber: Option<f64>,
    dc: f64,
}

impl From<AttackMetrics> for PyAttackMetrics {
    fn from(m: AttackMetrics) -> Self {
        Self {
            gain: m.gain,
            qber: m.qber.value(),
            dc: m.dc,
        }
    }
}

#[pymethods]
impl PyAttackMetrics {
    fn __repr__(&self) -> String {
        let q = self.qber.map_or("None".to_string(), |q| q.to_string());
        format!("AttackMetrics(gain={}, qber={q}, dc={})", self.gain, self.dc)
    }
}

#[pyclass(name = "McEstimate", frozen, skip_from_py_object, get_all, module = "seqattack")]
#[derive(Clone, Copy)]
struct PyMcEstimate {
    mean: f64,
    stderr: f64,
    n_blocks: u64,
    seed: u64,
}

impl From<sim::McEstimate> for PyMcEstimate {
    fn from(e: sim::McEstimate) -> Self {
        Self {
            mean: e.mean,
            stderr: e.stderr,
            n_blocks: e.n_blocks,
            seed: e.seed,
        }
    }
}

#[pymethods]
impl PyMcEstimate {
    fn __repr__(&self) -> String {
        format!("McEstimate(mean={}, stderr={}, n_blocks={})", self.mean, self.stderr, self.n_blocks)
    }
}

#[pyclass(name = "FrontierPoint", frozen, skip_from_py_object, module = "seqattack")]
#[derive(Clone, Copy)]
struct PyFrontierPoint(frontier::FrontierPoint);

#[pymethods]
impl PyFrontierPoint {
    #[getter]
    fn gain(&self) -> f64 {
        self.0.gain
    }

    #[getter]
    fn qber(&self) -> f64 {
        self.0.qber
    }

    #[getter]
    fn dc(&self) -> f64 {
        self.0.dc
    }

    #[getter]
    fn block_len(&self) -> usize {
        self.0.block_len
    }

    #[getter]
    fn min_run(&self) -> usize {
        self.0.min_run
    }

    #[getter]
    fn send_prob(&self) -> f64 {
        self.0.send_prob
    }

    #[getter]
    fn mu_beta(&self) -> f64 {
        self.0.mu_beta
    }

    #[getter]
    fn lambda_(&self) -> Option<f64> {
        self.0.lambda
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.0.strategy.as_str()
    }

    fn __repr__(&self) -> String {
        format!("FrontierPoint({})", frontier_io::frontier_row(&self.0))
    }
}

#[pyfunction]
fn metrics(src: &PySourceParams, strategy: &PyStrategy, policy: &PyBlockPolicy) -> PyResult<PyAttackMetrics> {
    Ok(model(block_analytics::metrics(&src.0, &strategy.0, &policy.0))?.into())
}

#[pyfunction]
fn max_gain_point(p_succ: f64) -> PyResult<PyAttackMetrics> {
    Ok(model(block_analytics::max_gain_point(p_succ))?.into())
}

/// Exact block statistics by enumerating every success pattern (M <= 12).
#[pyfunction]
fn enumerate_exact(src: &PySourceParams, strategy: &PyStrategy, policy: &PyBlockPolicy) -> PyResult<PyAttackMetrics> {
    Ok(model(sim::enumerate_exact(&src.0, &strategy.0, &policy.0))?.metrics.into())
}

/// Returns `(gain, qber, dc)` estimates; `qber` is None without clicks.
#[pyfunction]
#[pyo3(signature = (src, strategy, policy, n_blocks, seed, workers=None))]
fn simulate_chain(
    py: Python<'_>,
    src: &PySourceParams,
    strategy: &PyStrategy,
    policy: &PyBlockPolicy,
    n_blocks: u64,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<(PyMcEstimate, Option<PyMcEstimate>, PyMcEstimate)> {
    let (s, st, p) = (src.0, strategy.0, policy.0);
    let est = model(py.detach(|| sim::simulate_chain(&s, &st, &p, n_blocks, seed, workers)))?;
    Ok((est.gain.into(), est.qber.map(Into::into), est.dc.into()))
}

/// Best `(mu_beta, metrics)` for one block configuration, or None when the
/// double-click cap rules out every `mu_beta`.
#[pyfunction]
#[pyo3(signature = (src, strategy, block_len, send_prob, dc_cap=None))]
fn optimize_mu_beta(
    src: &PySourceParams,
    strategy: &PyStrategy,
    block_len: usize,
    send_prob: f64,
    dc_cap: Option<f64>,
) -> PyResult<Option<(f64, PyAttackMetrics)>> {
    let out = model(frontier::optimize_mu_beta(
        &src.0,
        &strategy.0,
        block_len,
        send_prob,
        dc_cap,
        None,
        &MuBetaSearch::default(),
    ))?;
    Ok(match out {
        MuBetaOutcome::Optimal(c) => Some((c.mu_beta, c.metrics.into())),
        MuBetaOutcome::Infeasible => None,
    })
}

fn family(src: &SourceParams, kind: &str, lambdas: Option<Vec<f64>>) -> PyResult<StrategyFamily> {
    let kind = StrategyKind::parse(kind).ok_or_else(|| value_error(format!("unknown strategy family {kind:?}")))?;
    match (kind, lambdas) {
        (StrategyKind::Usd, None) => Ok(StrategyFamily::Usd),
        (StrategyKind::BobDevice, None) => Ok(StrategyFamily::BobDevice),
        (StrategyKind::Med, None) => Ok(StrategyFamily::med_default(src)),
        (StrategyKind::Med, Some(lambdas)) => Ok(StrategyFamily::Med { lambdas }),
        (kind, Some(_)) => Err(value_error(format!("family {kind} takes no lambdas"))),
    }
}

/// Pareto frontier sorted by gain; defaults cover M in 3..=41 and q in
/// steps of 0.1.
#[pyfunction]
#[pyo3(signature = (mu_alpha, family_kind, dc_cap=None, block_lens=None, send_probs=None, lambdas=None, workers=None))]
#[allow(clippy::too_many_arguments)]
fn build_frontier(
    py: Python<'_>,
    mu_alpha: f64,
    family_kind: &str,
    dc_cap: Option<f64>,
    block_lens: Option<Vec<usize>>,
    send_probs: Option<Vec<f64>>,
    lambdas: Option<Vec<f64>>,
    workers: Option<usize>,
) -> PyResult<Vec<PyFrontierPoint>> {
    let src = model(SourceParams::new(mu_alpha))?;
    let mut cfg = SweepConfig::new(mu_alpha, family(&src, family_kind, lambdas)?, dc_cap);
    if let Some(b) = block_lens {
        cfg.block_lens = b;
    }
    if let Some(q) = send_probs {
        cfg.send_probs = q;
    }
    let front = model(py.detach(|| frontier::build_frontier(&cfg, workers)))?;
    Ok(front.points.into_iter().map(PyFrontierPoint).collect())
}

/// `(verdict, frontier_qber, dominating_point)` for an observed operating
/// point.
#[pyfunction]
fn assess_point(
    gain: f64,
    qber: f64,
    points: Vec<PyRef<'_, PyFrontierPoint>>,
) -> PyResult<(&'static str, Option<f64>, Option<PyFrontierPoint>)> {
    let front: Vec<_> = points.iter().map(|p| p.0).collect();
    let point = ExperimentPoint {
        label: String::new(),
        gain,
        qber,
        mu_alpha: None,
        dc_cap: None,
    };
    let a = model(frontier::assess_point(&point, &front))?;
    let verdict = match a.verdict {
        frontier::Verdict::InsecureAgainstSequential => "INSECURE_AGAINST_SEQUENTIAL",
        frontier::Verdict::NotExcluded => "NOT_EXCLUDED",
    };
    Ok((verdict, a.frontier_qber, a.dominating.map(PyFrontierPoint)))
}

#[pyfunction]
fn frontier_csv(points: Vec<PyRef<'_, PyFrontierPoint>>) -> String {
    let front: Vec<_> = points.iter().map(|p| p.0).collect();
    frontier_io::frontier_csv(&front)
}

#[pyfunction]
fn read_frontier_csv(text: &str) -> PyResult<Vec<PyFrontierPoint>> {
    let points = frontier_io::read_frontier_csv(text.as_bytes()).map_err(value_error)?;
    Ok(points.into_iter().map(PyFrontierPoint).collect())
}

/// Runs the closed-form cross-check sweep; returns `(passed, cells, failed)`.
#[pyfunction]
#[pyo3(signature = (usd_only=false, monte_carlo=true, seed=0))]
fn verify(py: Python<'_>, usd_only: bool, monte_carlo: bool, seed: u64) -> PyResult<(bool, usize, usize)> {
    let mut sweep = if usd_only { VerifySweep::usd_only() } else { VerifySweep::default() };
    if !monte_carlo {
        sweep.monte_carlo = None;
    }
    let report = model(py.detach(|| run_verification(&sweep, seed, None)))?;
    Ok((report.passed, report.cells, report.failed))
}

#[pymodule]
#[pyo3(name = "seqattack")]
fn seqattack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySourceParams>()?;
    m.add_class::<PyStrategy>()?;
    m.add_class::<PyBlockPolicy>()?;
    m.add_class::<PyAttackMetrics>()?;
    m.add_class::<PyMcEstimate>()?;
    m.add_class::<PyFrontierPoint>()?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(max_gain_point, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_exact, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_chain, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_mu_beta, m)?)?;
    m.add_function(wrap_pyfunction!(build_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(assess_point, m)?)?;
    m.add_function(wrap_pyfunction!(frontier_csv, m)?)?;
    m.add_function(wrap_pyfunction!(read_frontier_csv, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
