//! Python bindings: configuration, episodes, training, evaluation and the
//! exact routing oracle.

use std::path::PathBuf;

use c2s_core::c2s::{c2s_reward, RewardComponents};
use c2s_core::config::{AgentCombo, RunConfig};
use c2s_core::graph::decode_similarity;
use c2s_core::metrics::{EpisodeMetrics, COLUMNS};
use c2s_core::oracle::{brute_force, heuristic_routes, validate, MicroInstance};
use c2s_core::orchestrator::{self, episode_seed, Agents as CoreAgents, EpisodeSettings};
use c2s_core::rng::{self, tag};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: c2s_core::Error) -> PyErr {
    match e {
        c2s_core::Error::Config(_) | c2s_core::Error::Parse(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &EpisodeMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in COLUMNS.iter().zip(m.values()) {
        d.set_item(*k, v)?;
    }
    Ok(d)
}

/// Run configuration parsed from TOML text plus `key -> value` overrides.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (text = "", overrides = None))]
    fn new(text: &str, overrides: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let inner = RunConfig::parse(text, &overrides.unwrap_or_default()).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = None))]
    fn load(path: PathBuf, overrides: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let inner = RunConfig::load(path, &overrides.unwrap_or_default()).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn combo(&self) -> String {
        self.inner.combo.to_string()
    }

    #[getter]
    fn episodes(&self) -> u64 {
        self.inner.episodes
    }

    #[getter]
    fn seeds(&self) -> Vec<u64> {
        self.inner.seeds.clone()
    }

    #[getter]
    fn capacity(&self) -> u32 {
        self.inner.env.vehicle_capacity
    }

    fn __repr__(&self) -> String {
        format!("Config(combo={}, episodes={}, seeds={:?})", self.inner.combo, self.inner.episodes, self.inner.seeds)
    }
}

/// Trained networks of one combo.
#[pyclass(name = "Agents")]
struct PyAgents {
    combo: AgentCombo,
    inner: CoreAgents,
}

#[pymethods]
impl PyAgents {
    #[staticmethod]
    fn load(path: PathBuf, combo: &str, config: &PyConfig) -> PyResult<Self> {
        let combo: AgentCombo = combo.parse().map_err(err)?;
        let inner = CoreAgents::load(&path, combo, &config.inner).map_err(err)?;
        Ok(Self { combo, inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn combo(&self) -> String {
        self.combo.to_string()
    }

    /// C2S network parameters, flattened (empty for heuristic C2S).
    fn c2s_parameters(&self) -> Vec<f64> {
        self.inner.c2s.as_ref().map(|a| a.net.flat_parameters()).unwrap_or_default()
    }
}

fn agents_for(combo: AgentCombo, agents: Option<&PyAgents>) -> PyResult<CoreAgents> {
    match agents {
        Some(a) if a.combo == combo => Ok(a.inner.clone()),
        Some(a) => Err(PyValueError::new_err(format!("agents are for {}, not {combo}", a.combo))),
        None => Ok(CoreAgents::default()),
    }
}

/// One greedy episode; returns its metrics.
#[pyfunction]
#[pyo3(signature = (config, seed, episode = 0, agents = None))]
fn run_episode<'py>(
    py: Python<'py>,
    config: &PyConfig,
    seed: u64,
    episode: u64,
    agents: Option<PyRef<'_, PyAgents>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = &config.inner;
    let mut a = agents_for(cfg.combo, agents.as_deref())?;
    let out = orchestrator::run_episode(cfg.combo, &mut a, cfg, &cfg.demand, episode_seed(seed, episode), EpisodeSettings::eval())
        .map_err(err)?;
    metrics_dict(py, &EpisodeMetrics { episode, seed, ..out.metrics })
}

/// Trains `config.combo` on every seed; returns `(seed, curve, agents)` tuples.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Vec<(u64, Vec<Bound<'py, PyDict>>, PyAgents)>> {
    let cfg = config.inner.clone();
    let runs = py
        .detach(|| {
            let gae = if cfg.combo.learned_c2s() { Some(orchestrator::train_gae_model(&cfg)?.model) } else { None };
            orchestrator::train(&cfg, gae)
        })
        .map_err(err)?;
    runs.into_iter()
        .map(|r| {
            let curve = r.curve.iter().map(|m| metrics_dict(py, m)).collect::<PyResult<Vec<_>>>()?;
            Ok((r.seed, curve, PyAgents { combo: cfg.combo, inner: r.agents }))
        })
        .collect()
}

/// Greedy evaluation over the configured evaluation seeds.
#[pyfunction]
#[pyo3(signature = (config, agents = None))]
fn evaluate<'py>(py: Python<'py>, config: &PyConfig, agents: Option<PyRef<'_, PyAgents>>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config.inner.clone();
    let a = agents_for(cfg.combo, agents.as_deref())?;
    let records = py.detach(|| orchestrator::evaluate(cfg.combo, &a, &cfg)).map_err(err)?;
    records.iter().map(|m| metrics_dict(py, m)).collect()
}

/// Order reward from its components.
#[pyfunction]
#[pyo3(signature = (d, l, f, u, a1 = 1.0, a2 = 1.0))]
fn reward(d: f64, l: f64, f: f64, u: f64, a1: f64, a2: f64) -> PyResult<f64> {
    c2s_reward(&RewardComponents { d, l, f, u }, a1, a2).map_err(err)
}

/// Decoded similarity of two embeddings.
#[pyfunction]
fn similarity(e1: [f64; 2], e2: [f64; 2], max_distance: f64) -> f64 {
    decode_similarity(e1, e2, max_distance)
}

/// Exact versus heuristic cost on random tiny instances:
/// `(exact, heuristic)` per instance, heuristic `None` when it dropped orders.
#[pyfunction]
#[pyo3(signature = (config, instances = 50, max_orders = 6, seed = 0))]
fn oracle_compare(config: &PyConfig, instances: usize, max_orders: usize, seed: u64) -> PyResult<Vec<(Option<f64>, Option<f64>)>> {
    let env = &config.inner.env;
    let mut r = rng::substream(seed, tag::INSTANCES);
    let mut out = Vec::with_capacity(instances);
    for _ in 0..instances {
        let n = 1 + (rng::mix(seed, out.len() as u64) % max_orders.max(1) as u64) as usize;
        let inst = MicroInstance::random(&mut r, n, env.vehicle_capacity, env.vehicle_speed, env.service_time);
        let exact = brute_force(&inst).map_err(err)?;
        let (routes, dropped) = heuristic_routes(&inst);
        let heuristic = dropped.is_empty().then(|| routes.iter().map(|route| inst.route_distance(route)).sum());
        if let Some(s) = &exact {
            if let Some(v) = validate(&inst, &s.routes).first() {
                return Err(PyRuntimeError::new_err(format!("exact plan invalid: {v}")));
            }
        }
        out.push((exact.map(|s| s.cost), heuristic));
    }
    Ok(out)
}

#[pymodule]
fn c2s(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyAgents>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(reward, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_compare, m)?)?;
    m.add("COMBOS", AgentCombo::ALL.iter().map(|c| c.to_string()).collect::<Vec<_>>())?;
    Ok(())
}
