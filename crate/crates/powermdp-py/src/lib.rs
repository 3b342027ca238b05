//! Python bindings for the `powermdp` crate.

use powermdp::mdp::{optimal_solution, optimal_value, Policy, RewardFunction, RewardlessMdp};
use powermdp::power::{self, EstimateWithCI, OptTarget, RewardDistributionSpec, Sampling};
use powermdp::retarget::{self, BanditConfig, OutcomeProblem};
use powermdp::sideffects::{self, experiment::ExperimentConfig, regret::PolicySpec};
use powermdp::{bundled, cli, visit, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(_powermdp, SizeCapError, PyException, "Enumeration or orbit size exceeded its cap.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Input(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        Error::SizeCap { .. } => SizeCapError::new_err(e.to_string()),
        Error::Numerical(_) | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for powermdp::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// A finite MDP without rewards.
#[pyclass(name = "Mdp", module = "powermdp", frozen)]
struct PyMdp {
    inner: RewardlessMdp,
}

impl PyMdp {
    fn state(&self, name: &str) -> PyResult<usize> {
        self.inner.state_index(name).py()
    }

    fn policy(&self, actions: Vec<usize>) -> PyResult<Policy> {
        let pi = Policy(actions);
        pi.check(&self.inner).py()?;
        Ok(pi)
    }
}

#[pymethods]
impl PyMdp {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMdp { inner: RewardlessMdp::from_json_str(text).py()? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMdp { inner: RewardlessMdp::load(path).py()? })
    }

    /// One of the example MDPs shipped with the library.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        Ok(PyMdp { inner: bundled::load(name).py()? })
    }

    #[staticmethod]
    fn bundled_names() -> Vec<&'static str> {
        bundled::names().collect()
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    #[getter]
    fn state_names(&self) -> Vec<String> {
        self.inner.state_names().to_vec()
    }

    #[getter]
    fn action_names(&self) -> Vec<String> {
        self.inner.action_names().to_vec()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn optimal_values(&self, reward: Vec<f64>, gamma: f64) -> PyResult<Vec<f64>> {
        optimal_value(&self.inner, &RewardFunction::state(reward), gamma).py()
    }

    /// Action index per state of an optimal deterministic policy.
    fn optimal_policy(&self, reward: Vec<f64>, gamma: f64) -> PyResult<Vec<usize>> {
        Ok(optimal_solution(&self.inner, &RewardFunction::state(reward), gamma, None).py()?.policy.0)
    }

    fn visit_distribution(&self, policy: Vec<usize>, state: &str, gamma: f64) -> PyResult<Vec<f64>> {
        let pi = self.policy(policy)?;
        visit::visit_distribution(&self.inner, &pi, self.state(state)?, gamma).py()
    }

    fn __repr__(&self) -> String {
        format!("Mdp(states={}, actions={})", self.inner.n_states(), self.inner.n_actions())
    }
}

/// A Monte Carlo or exact estimate with its Hoeffding radius.
#[pyclass(name = "Estimate", module = "powermdp", frozen, get_all)]
struct PyEstimate {
    estimate: f64,
    radius: f64,
    n: usize,
    seed: u64,
    confidence: f64,
    exact: bool,
}

impl From<EstimateWithCI> for PyEstimate {
    fn from(e: EstimateWithCI) -> Self {
        PyEstimate { estimate: e.estimate, radius: e.radius, n: e.n, seed: e.seed, confidence: e.confidence, exact: e.exact }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!("Estimate({} ± {}, n={}, seed={})", self.estimate, self.radius, self.n, self.seed)
    }

    fn __float__(&self) -> f64 {
        self.estimate
    }
}

fn spec(mdp: &PyMdp, dist: &str) -> PyResult<RewardDistributionSpec> {
    RewardDistributionSpec::parse(dist, &mdp.inner).py()
}

#[pyfunction(name = "power")]
#[pyo3(signature = (mdp, state, gamma, dist = "uniform01", samples = 100_000, seed = 0))]
fn py_power(mdp: PyRef<'_, PyMdp>, state: &str, gamma: f64, dist: &str, samples: usize, seed: u64) -> PyResult<PyEstimate> {
    let d = spec(&mdp, dist)?;
    Ok(power::power(&mdp.inner, mdp.state(state)?, gamma, &d, &Sampling::new(samples, seed)).py()?.into())
}

#[pyfunction]
#[pyo3(signature = (mdp, state, action, gamma, dist = "uniform01", samples = 100_000, seed = 0))]
fn optimality_probability(
    mdp: PyRef<'_, PyMdp>,
    state: &str,
    action: &str,
    gamma: f64,
    dist: &str,
    samples: usize,
    seed: u64,
) -> PyResult<PyEstimate> {
    let d = spec(&mdp, dist)?;
    let a = mdp.inner.action_index(action).py()?;
    let s = mdp.state(state)?;
    Ok(power::optimality_probability(&mdp.inner, s, &OptTarget::Action(a), gamma, &d, &Sampling::new(samples, seed))
        .py()?
        .into())
}

/// Probability that `rule` picks an outcome in `x`; `rule` uses the CLI syntax, e.g. `boltzmann:0.5`.
#[pyfunction]
fn decision_prob(rule: &str, x: Vec<usize>, vectors: Vec<Vec<f64>>, a: Vec<usize>, b: Vec<usize>, utility: Vec<f64>) -> PyResult<f64> {
    let problem = OutcomeProblem::new(vectors, a, b).py()?;
    let r = cli::parse_rule(rule).py()?;
    retarget::decision_prob(&r, &x, &problem, &utility).py()
}

#[pyfunction]
#[pyo3(signature = (utility, epsilon = 0.1, trials = 100, samples = 10_000, seed = 0))]
fn bandit_train_prob(utility: Vec<f64>, epsilon: f64, trials: usize, samples: usize, seed: u64) -> PyResult<Vec<PyEstimate>> {
    let cfg = BanditConfig::new(utility, epsilon, trials).py()?;
    Ok(retarget::bandit_train_prob(&cfg, &Sampling::new(samples, seed)).py()?.into_iter().map(Into::into).collect())
}

/// `(pregret, v_star, v_pi, v_min)` for a stationary policy, or one corrected after `switch_at` steps.
#[pyfunction]
#[pyo3(signature = (mdp, state, reward, policy, gamma, switch_at = None))]
fn proportional_regret(
    mdp: PyRef<'_, PyMdp>,
    state: &str,
    reward: Vec<f64>,
    policy: Vec<usize>,
    gamma: f64,
    switch_at: Option<usize>,
) -> PyResult<(f64, f64, f64, f64)> {
    let pi = mdp.policy(policy)?;
    let spec = match switch_at {
        Some(steps) => PolicySpec::Switch { prefix: pi, steps },
        None => PolicySpec::Stationary(pi),
    };
    let r = sideffects::proportional_regret(&mdp.inner, &spec, &RewardFunction::state(reward), mdp.state(state)?, gamma)
        .py()?;
    Ok((r.pregret, r.v_star, r.v_pi, r.v_min))
}

/// `(surrogate reward, γ_aup, prefix policy)` for a geometric correction time.
#[pyfunction]
#[pyo3(signature = (mdp, p, gamma, dist = "uniform01", samples = 10_000, seed = 0))]
fn solve_delayed_geometric(
    mdp: PyRef<'_, PyMdp>,
    p: f64,
    gamma: f64,
    dist: &str,
    samples: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, f64, Vec<usize>)> {
    let d = spec(&mdp, dist)?;
    let sol = sideffects::solve_delayed_geometric(&mdp.inner, &d, p, gamma, &Sampling::new(samples, seed)).py()?;
    Ok((sol.surrogate, sol.gamma_aup, sol.policy.0))
}

/// `(mdp, at_goal, side_effect)` for `options` or `damage`.
#[pyfunction]
fn gridworld(name: &str) -> PyResult<(PyMdp, Vec<bool>, Vec<bool>)> {
    let env = sideffects::build_gridworld(name).py()?;
    Ok((PyMdp { inner: env.mdp }, env.at_goal, env.side_effect))
}

/// Rows `(seed, condition, dist, score, residual)` of the vanilla-versus-AUP comparison.
#[pyfunction]
#[pyo3(signature = (env, seeds, episodes = 5000))]
fn gridworld_experiment(py: Python<'_>, env: &str, seeds: Vec<u64>, episodes: usize) -> PyResult<Vec<(u64, String, String, f64, f64)>> {
    let mut cfg = ExperimentConfig::default();
    cfg.qlearning.episodes = episodes;
    let rep = py.detach(|| sideffects::run_experiment(env, &seeds, &cfg)).py()?;
    let label = |v: serde_json::Value| v.as_str().unwrap_or_default().to_string();
    Ok(rep
        .rows()
        .map(|r| {
            let c = label(serde_json::to_value(r.condition).unwrap_or_default());
            let d = label(serde_json::to_value(r.dist).unwrap_or_default());
            (r.seed, c, d, r.score, r.residual)
        })
        .collect())
}

#[pymodule]
fn _powermdp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMdp>()?;
    m.add_class::<PyEstimate>()?;
    m.add("SizeCapError", m.py().get_type::<SizeCapError>())?;
    m.add_function(wrap_pyfunction!(py_power, m)?)?;
    m.add_function(wrap_pyfunction!(optimality_probability, m)?)?;
    m.add_function(wrap_pyfunction!(decision_prob, m)?)?;
    m.add_function(wrap_pyfunction!(bandit_train_prob, m)?)?;
    m.add_function(wrap_pyfunction!(proportional_regret, m)?)?;
    m.add_function(wrap_pyfunction!(solve_delayed_geometric, m)?)?;
    m.add_function(wrap_pyfunction!(gridworld, m)?)?;
    m.add_function(wrap_pyfunction!(gridworld_experiment, m)?)?;
    Ok(())
}
