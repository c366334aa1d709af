//! Python bindings. Results are returned as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use powergame::channel::{normalize, sample_admissible_channel, DEFAULT_REJECTION_CAP};
use powergame::game::iterative_waterfilling as iw;
use powergame::harness::{self, ExperimentSpec};
use powergame::stackelberg;
use powergame::waterfill::{waterfill_bisection, waterfill_closed_form};
use powergame::{
    ChannelError, ChannelRealization, EffectiveNoise, GameConfig, GameError, HarnessError, LeaderProblem, SolverError,
    Topology,
};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn channel_err(e: ChannelError) -> PyErr {
    match e {
        ChannelError::RejectionCapExceeded { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn solver_err(e: SolverError) -> PyErr {
    match e {
        SolverError::Config(_) | SolverError::Game(GameError::Config(_)) => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Solver(e) => solver_err(e),
        HarnessError::Channel(e) => channel_err(e),
        HarnessError::Spec(_) | HarnessError::Json(_) | HarnessError::EmptySample => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Converts any serializable value into the equivalent Python object.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Budgets for `users` users from either one shared value or a list.
fn expand_budgets(budgets: Vec<f64>, users: usize) -> PyResult<Vec<f64>> {
    match budgets.len() {
        1 => Ok(vec![budgets[0]; users]),
        n if n == users => Ok(budgets),
        n => Err(value_err(format!("{n} budgets for {users} users"))),
    }
}

/// `cross[j][k][f]`.
type Cross = Vec<Vec<Vec<f64>>>;

/// A channel realization: `gain[j][k][f]` is the power gain from
/// transmitter `j` to receiver `k` in bin `f`; `noise[k][f]` the noise PSD.
#[pyclass(name = "Channel", module = "powergame", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelRealization,
}

#[pymethods]
impl PyChannel {
    #[new]
    fn new(gain: Vec<Vec<Vec<f64>>>, noise: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = ChannelRealization::new(gain, noise).map_err(channel_err)?;
        Ok(PyChannel { inner })
    }

    /// Two-user channel given directly in normalized form.
    #[staticmethod]
    fn two_user(noise_1: Vec<f64>, noise_2: Vec<f64>, alpha: f64) -> PyResult<Self> {
        let nc = powergame::NormalizedChannel::two_user([noise_1, noise_2], alpha).map_err(channel_err)?;
        Ok(PyChannel {
            inner: ChannelRealization::from_normalized(&nc),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyChannel {
            inner: ChannelRealization::from_json(text).map_err(channel_err)?,
        })
    }

    /// Samples a diagonally dominant channel from the default multipath
    /// profile.
    #[staticmethod]
    #[pyo3(signature = (users, bins, cross_power, noise=0.01, seed=0, direct_power=1.0))]
    fn sample(users: usize, bins: usize, cross_power: f64, noise: f64, seed: u64, direct_power: f64) -> PyResult<Self> {
        let topo = Topology {
            num_users: users,
            num_bins: bins,
            direct_power,
            cross_power,
            noise,
        };
        let draw =
            sample_admissible_channel(&Default::default(), &topo, seed, DEFAULT_REJECTION_CAP).map_err(channel_err)?;
        Ok(PyChannel { inner: draw.channel })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users
    }

    #[getter]
    fn num_bins(&self) -> usize {
        self.inner.num_bins
    }

    /// `(noise_norm[k][f], cross[j][k][f])` of the normalized channel.
    fn normalized(&self) -> PyResult<(Vec<Vec<f64>>, Cross)> {
        let nc = normalize(&self.inner).map_err(channel_err)?;
        let k = nc.num_users();
        let cross = (0..k)
            .map(|j| (0..k).map(|i| nc.cross(j, i).to_vec()).collect())
            .collect();
        Ok((nc.noise_matrix().to_vec(), cross))
    }

    fn max_spectral_norm(&self) -> PyResult<f64> {
        Ok(normalize(&self.inner).map_err(channel_err)?.max_spectral_norm())
    }

    fn is_diagonally_dominant(&self) -> PyResult<bool> {
        Ok(normalize(&self.inner).map_err(channel_err)?.is_diagonally_dominant())
    }

    /// Rate of `user` in bits under the power profile `powers[k][f]`.
    fn rate(&self, user: usize, powers: Vec<Vec<f64>>) -> PyResult<f64> {
        let nc = normalize(&self.inner).map_err(channel_err)?;
        if user >= nc.num_users() || powers.len() != nc.num_users() || powers.iter().any(|p| p.len() != nc.num_bins()) {
            return Err(value_err("power profile does not match the channel"));
        }
        Ok(nc.rate_bits(user, &powers))
    }

    fn __repr__(&self) -> String {
        format!("Channel(users={}, bins={})", self.inner.num_users, self.inner.num_bins)
    }
}

fn leader_problem(channel: &PyChannel, budgets: Vec<f64>, leader: usize, grid_step: f64) -> PyResult<LeaderProblem> {
    let nc = normalize(&channel.inner).map_err(channel_err)?;
    let budgets = expand_budgets(budgets, nc.num_users())?;
    let prob = LeaderProblem::new(nc, leader, budgets, grid_step);
    prob.validate().map_err(solver_err)?;
    Ok(prob)
}

/// Single-user water-fill of `budget` over effective noise `nu`.
#[pyfunction]
#[pyo3(signature = (nu, budget, method="closed_form"))]
fn waterfill(nu: Vec<f64>, budget: f64, method: &str) -> PyResult<Vec<f64>> {
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(value_err("budget must be finite and non-negative"));
    }
    let nu = EffectiveNoise::new(nu).map_err(value_err)?;
    match method {
        "closed_form" => Ok(waterfill_closed_form(&nu, budget).0.power),
        "bisection" => Ok(waterfill_bisection(&nu, budget).power),
        _ => Err(value_err(format!("unknown method {method:?}"))),
    }
}

/// Nash equilibrium by iterative water-filling.
#[pyfunction]
#[pyo3(signature = (channel, budgets, tolerance=None, max_iters=None, initial=None))]
fn iterative_waterfilling(
    py: Python<'_>,
    channel: &PyChannel,
    budgets: Vec<f64>,
    tolerance: Option<f64>,
    max_iters: Option<usize>,
    initial: Option<Vec<Vec<f64>>>,
) -> PyResult<Py<PyAny>> {
    let nc = normalize(&channel.inner).map_err(channel_err)?;
    let mut cfg = GameConfig::new(expand_budgets(budgets, nc.num_users())?);
    cfg.iw_tolerance = tolerance;
    if let Some(m) = max_iters {
        cfg.iw_max_iters = m;
    }
    let ne = iw(&nc, &cfg, initial.as_deref()).map_err(|e| solver_err(e.into()))?;
    to_py(py, &ne)
}

#[pyfunction]
#[pyo3(signature = (channel, budgets, leader=0, grid_step=0.1))]
fn exhaustive_stackelberg(
    py: Python<'_>,
    channel: &PyChannel,
    budgets: Vec<f64>,
    leader: usize,
    grid_step: f64,
) -> PyResult<Py<PyAny>> {
    let prob = leader_problem(channel, budgets, leader, grid_step)?;
    to_py(py, &stackelberg::exhaustive_stackelberg(&prob).map_err(solver_err)?)
}

/// The low-complexity dual ascent for the leader.
#[pyfunction]
#[pyo3(signature = (channel, budgets, leader=0, grid_step=0.1))]
fn algorithm1_dual(
    py: Python<'_>,
    channel: &PyChannel,
    budgets: Vec<f64>,
    leader: usize,
    grid_step: f64,
) -> PyResult<Py<PyAny>> {
    let prob = leader_problem(channel, budgets, leader, grid_step)?;
    to_py(py, &stackelberg::algorithm1_dual(&prob).map_err(solver_err)?)
}

/// Leader rate in bits after the followers respond to `p1`.
#[pyfunction]
#[pyo3(signature = (channel, budgets, p1, leader=0))]
fn leader_objective(channel: &PyChannel, budgets: Vec<f64>, p1: Vec<f64>, leader: usize) -> PyResult<f64> {
    let budget = budgets.iter().copied().fold(0.0, f64::max);
    let prob = leader_problem(channel, budgets, leader, budget)?;
    stackelberg::leader_objective(&p1, &prob).map_err(solver_err)
}

/// `(allocation, bits)` of the leader's interference-free water-fill.
#[pyfunction]
#[pyo3(signature = (channel, budgets, leader=0))]
fn interference_free_bound(channel: &PyChannel, budgets: Vec<f64>, leader: usize) -> PyResult<(Vec<f64>, f64)> {
    let budget = budgets.iter().copied().fold(0.0, f64::max);
    let prob = leader_problem(channel, budgets, leader, budget)?;
    let (alloc, bits) = stackelberg::interference_free_bound(&prob).map_err(solver_err)?;
    Ok((alloc.power, bits))
}

/// Grid-relaxed Lagrangian dual bound: `{mu_star, dual_value_bits, total_power, iterations}`.
#[pyfunction]
#[pyo3(signature = (channel, budgets, leader=0, grid_step=0.1))]
fn dual_bound(
    py: Python<'_>,
    channel: &PyChannel,
    budgets: Vec<f64>,
    leader: usize,
    grid_step: f64,
) -> PyResult<Py<PyAny>> {
    let prob = leader_problem(channel, budgets, leader, grid_step)?;
    let b = stackelberg::dual_bound(&prob, grid_step).map_err(solver_err)?;
    #[derive(Serialize)]
    struct Out {
        mu_star: f64,
        dual_value_bits: f64,
        total_power: f64,
        iterations: usize,
    }
    to_py(
        py,
        &Out {
            mu_star: b.mu_star,
            dual_value_bits: b.dual_value_bits,
            total_power: b.total_power,
            iterations: b.iterations,
        },
    )
}

#[pyfunction]
fn reproduce_example(py: Python<'_>, which: u8) -> PyResult<Py<PyAny>> {
    to_py(py, &harness::reproduce_example(which).map_err(harness_err)?)
}

/// Runs a Monte-Carlo experiment from its JSON spec and returns
/// `{records, summary, cdfs}`.
#[pyfunction]
fn run_experiment(py: Python<'_>, spec_json: &str) -> PyResult<Py<PyAny>> {
    let spec = ExperimentSpec::from_json(spec_json).map_err(harness_err)?;
    let out = py.detach(|| harness::run_experiment(&spec)).map_err(harness_err)?;
    #[derive(Serialize)]
    struct Out<'a> {
        records: &'a [harness::TrialRecord],
        summary: &'a harness::Summary,
        cdfs: &'a [Vec<(f64, f64)>],
    }
    to_py(
        py,
        &Out {
            records: &out.records,
            summary: &out.summary,
            cdfs: &out.cdfs,
        },
    )
}

#[pyfunction]
fn empirical_cdf(values: Vec<f64>, grid: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    harness::empirical_cdf(&values, &grid).map_err(harness_err)
}

#[pymodule]
#[pyo3(name = "powergame")]
fn powergame_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(iterative_waterfilling, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_stackelberg, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm1_dual, m)?)?;
    m.add_function(wrap_pyfunction!(leader_objective, m)?)?;
    m.add_function(wrap_pyfunction!(interference_free_bound, m)?)?;
    m.add_function(wrap_pyfunction!(dual_bound, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_example, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_cdf, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
