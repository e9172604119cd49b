//! Python bindings. Arrays cross the boundary as nested lists; `gain` is
//! indexed `[user][bs][band]`, `noise` `[bs][band]`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vcell::channel::{alternating_solve, AllocationRule, AlternatingSettings};
use vcell::clustering::{self, Clustering};
use vcell::harness::{self, ExperimentConfig, HarnessError, OutputPaths};
use vcell::matching;
use vcell::power::{solve_power_continuous, SolverSettings};
use vcell::rate::CellView;
use vcell::scenario::Point;
use vcell::tensor::{Matrix, Tensor3};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Io { .. } | HarnessError::Csv { .. } => PyIOError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

fn points(xy: Vec<(f64, f64)>) -> Vec<Point> {
    xy.into_iter().map(|(x, y)| Point { x, y }).collect()
}

fn labels(c: Clustering) -> Vec<usize> {
    c.labels
}

fn tensor(nested: Vec<Vec<Vec<f64>>>) -> PyResult<Tensor3<f64>> {
    let nu = nested.len();
    let nb = nested.first().map_or(0, Vec::len);
    let nk = nested.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(nu * nb * nk);
    for row in nested {
        if row.len() != nb {
            return Err(value_err("ragged gain array"));
        }
        for col in row {
            if col.len() != nk {
                return Err(value_err("ragged gain array"));
            }
            flat.extend(col);
        }
    }
    Tensor3::from_vec([nu, nb, nk], flat).ok_or_else(|| value_err("bad gain shape"))
}

fn nested(t: &Tensor3<f64>) -> Vec<Vec<Vec<f64>>> {
    let [nu, nb, nk] = t.dims();
    (0..nu)
        .map(|u| (0..nb).map(|b| (0..nk).map(|k| t.at(u, b, k)).collect()).collect())
        .collect()
}

fn cell_view(
    gain: Vec<Vec<Vec<f64>>>,
    noise: Vec<Vec<f64>>,
    band_widths: Vec<f64>,
    budgets: Vec<f64>,
) -> PyResult<CellView> {
    let gain = tensor(gain)?;
    let [nu, nb, nk] = gain.dims();
    let noise = Matrix::from_rows(&noise).ok_or_else(|| value_err("ragged noise array"))?;
    if noise.rows() != nb || noise.cols() != nk || band_widths.len() != nk || budgets.len() != nu {
        return Err(value_err("shapes of gain, noise, band_widths and budgets disagree"));
    }
    Ok(CellView::from_parts(gain, noise, band_widths, budgets))
}

/// Experiment configuration. Built from JSON (an experiment document or a
/// bare system block) or from the `desk`/`full` presets.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyExperimentConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => ExperimentConfig::from_json(text).map_err(harness_err)?,
            None => ExperimentConfig::desk(),
        };
        Ok(PyExperimentConfig { inner })
    }

    #[staticmethod]
    fn desk() -> Self {
        PyExperimentConfig { inner: ExperimentConfig::desk() }
    }

    #[staticmethod]
    fn full() -> Self {
        PyExperimentConfig { inner: ExperimentConfig::full() }
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("config serializes")
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(harness_err)
    }

    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }

    #[setter]
    fn set_trials(&mut self, n: usize) {
        self.inner.trials = n;
    }

    #[getter]
    fn master_seed(&self) -> u64 {
        self.inner.master_seed
    }

    #[setter]
    fn set_master_seed(&mut self, s: u64) {
        self.inner.master_seed = s;
    }

    #[getter]
    fn cell_counts(&self) -> Vec<usize> {
        self.inner.cell_counts()
    }

    #[setter]
    fn set_cell_counts(&mut self, m: Vec<usize>) {
        self.inner.cell_counts = m;
    }

    #[getter]
    fn num_bs(&self) -> usize {
        self.inner.system.num_bs
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.system.num_users
    }

    #[getter]
    fn num_bands(&self) -> usize {
        self.inner.system.num_bands
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(num_bs={}, num_users={}, num_bands={}, trials={}, master_seed={})",
            self.inner.system.num_bs,
            self.inner.system.num_users,
            self.inner.system.num_bands,
            self.inner.trials,
            self.inner.master_seed
        )
    }
}

/// One trial's deployment and channel realization.
#[pyclass(name = "Scenario")]
struct PyScenario {
    #[pyo3(get)]
    bs_positions: Vec<(f64, f64)>,
    #[pyo3(get)]
    user_positions: Vec<(f64, f64)>,
    #[pyo3(get)]
    gain: Vec<Vec<Vec<f64>>>,
    #[pyo3(get)]
    noise: Vec<Vec<f64>>,
}

#[pyfunction]
fn scenario(config: &PyExperimentConfig, trial: usize) -> PyScenario {
    let s = harness::trial_scenario(&config.inner, trial);
    let xy = |ps: &[Point]| ps.iter().map(|p| (p.x, p.y)).collect();
    let noise = &s.channels.noise;
    PyScenario {
        bs_positions: xy(&s.deployment.bs_positions),
        user_positions: xy(&s.deployment.user_positions),
        gain: nested(&s.channels.gain),
        noise: (0..noise.rows()).map(|b| noise.row(b).to_vec()).collect(),
    }
}

/// Minimax-linkage merges as `(left, right, linkage)`; merge `i` creates id `n + i`.
#[pyfunction]
fn hierarchical_merges(points_xy: Vec<(f64, f64)>) -> Vec<(usize, usize, f64)> {
    clustering::hierarchical_cluster(&points(points_xy))
        .merges
        .iter()
        .map(|m| (m.left, m.right, m.linkage))
        .collect()
}

#[pyfunction]
fn hierarchical_labels(points_xy: Vec<(f64, f64)>, m: usize) -> PyResult<Vec<usize>> {
    let d = clustering::hierarchical_cluster(&points(points_xy));
    clustering::cut_dendrogram(&d, m).map(labels).map_err(value_err)
}

#[pyfunction]
fn minimax_radius(points_xy: Vec<(f64, f64)>, members: Vec<usize>) -> PyResult<(f64, usize)> {
    if members.is_empty() || members.iter().any(|&i| i >= points_xy.len()) {
        return Err(value_err("members must be nonempty valid indices"));
    }
    Ok(clustering::minimax_radius(&points(points_xy), &members))
}

#[pyfunction]
fn kmeans_labels(points_xy: Vec<(f64, f64)>, m: usize, seed: u64) -> PyResult<Vec<usize>> {
    let mut rng = harness::trial_rng(seed, 0, 0);
    clustering::kmeans_cluster(&points(points_xy), m, &mut rng).map(labels).map_err(value_err)
}

#[pyfunction]
fn spectral_labels(points_xy: Vec<(f64, f64)>, m: usize, sigma: f64, seed: u64) -> PyResult<Vec<usize>> {
    let mut rng = harness::trial_rng(seed, 0, 0);
    clustering::spectral_cluster(&points(points_xy), m, sigma, &mut rng)
        .map(labels)
        .map_err(value_err)
}

/// Maximum-weight one-to-one matching: `(row_to_col, total)`.
#[pyfunction]
fn max_weight_matching(weights: Vec<Vec<f64>>) -> PyResult<(Vec<Option<usize>>, f64)> {
    let w = Matrix::from_rows(&weights).ok_or_else(|| value_err("ragged weight matrix"))?;
    let m = matching::max_weight_matching(&w);
    Ok((m.row_to_col, m.total))
}

/// Continuous power allocation of one cell: `(power, rate_bps, converged)`.
#[pyfunction]
fn solve_power(
    gain: Vec<Vec<Vec<f64>>>,
    noise: Vec<Vec<f64>>,
    band_widths: Vec<f64>,
    budgets: Vec<f64>,
) -> PyResult<(Vec<Vec<Vec<f64>>>, f64, bool)> {
    let view = cell_view(gain, noise, band_widths, budgets)?;
    let sol = solve_power_continuous(&view, &SolverSettings::default(), None).map_err(value_err)?;
    Ok((nested(&sol.power.p), sol.rate, sol.converged))
}

/// Alternating channel/power allocation with rule `uc`, `bsc` or `msrm`:
/// `(power, assignment, rate_bps, rounds)`.
#[pyfunction]
fn solve_alternating(
    gain: Vec<Vec<Vec<f64>>>,
    noise: Vec<Vec<f64>>,
    band_widths: Vec<f64>,
    budgets: Vec<f64>,
    rule: &str,
) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<bool>>>, f64, usize)> {
    let rule = match rule {
        "uc" => AllocationRule::Uc,
        "bsc" => AllocationRule::Bsc,
        "msrm" => AllocationRule::Msrm,
        other => return Err(value_err(format!("unknown rule {other:?}"))),
    };
    let view = cell_view(gain, noise, band_widths, budgets)?;
    let out = alternating_solve(&view, rule, &AlternatingSettings::default(), &SolverSettings::default())
        .map_err(value_err)?;
    let [nu, nb, nk] = out.gamma.dims();
    let gamma = (0..nu)
        .map(|u| (0..nb).map(|b| (0..nk).map(|k| out.gamma.is_set(u, b, k)).collect()).collect())
        .collect();
    Ok((nested(&out.power.p), gamma, out.rate, out.iterations))
}

fn row_dict<'py>(py: Python<'py>, r: &harness::TrialRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("trial", r.trial)?;
    d.set_item("clustering", r.clustering.as_str())?;
    d.set_item("sigma", r.sigma)?;
    d.set_item("affiliation", r.affiliation.as_str())?;
    d.set_item("scheme", r.scheme.as_str())?;
    d.set_item("num_cells", r.num_cells)?;
    d.set_item("eval_mode", r.eval_mode.as_str())?;
    d.set_item("sum_rate_bps", r.sum_rate_bps)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

/// All rows of one trial as dictionaries.
#[pyfunction]
fn run_trial<'py>(py: Python<'py>, config: &PyExperimentConfig, trial: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    config.inner.validate().map_err(harness_err)?;
    let cfg = config.inner.clone();
    let res = py.detach(move || harness::run_trial(&cfg, trial));
    res.rows.iter().map(|r| row_dict(py, r)).collect()
}

/// Runs the experiment, optionally writing the raw and aggregate CSV files,
/// and returns the aggregate rows as dictionaries.
#[pyfunction]
#[pyo3(signature = (config, raw_csv = None, agg_csv = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &PyExperimentConfig,
    raw_csv: Option<PathBuf>,
    agg_csv: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config.inner.clone();
    let res = py
        .detach(move || {
            let out = OutputPaths { raw: raw_csv.as_deref(), aggregate: agg_csv.as_deref() };
            harness::run_experiment(&cfg, &out)
        })
        .map_err(harness_err)?;
    res.aggregate
        .iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("clustering", a.key.clustering.as_str())?;
            d.set_item("sigma", a.key.sigma)?;
            d.set_item("affiliation", a.key.affiliation.as_str())?;
            d.set_item("scheme", a.key.scheme.as_str())?;
            d.set_item("num_cells", a.key.num_cells)?;
            d.set_item("eval_mode", a.key.eval_mode.as_str())?;
            d.set_item("mean_bps", a.summary.mean)?;
            d.set_item("std_bps", a.summary.std)?;
            d.set_item("stderr_bps", a.summary.stderr)?;
            d.set_item("trials", a.summary.n)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn vcell_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExperimentConfig>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(scenario, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchical_merges, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchical_labels, m)?)?;
    m.add_function(wrap_pyfunction!(minimax_radius, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans_labels, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_labels, m)?)?;
    m.add_function(wrap_pyfunction!(max_weight_matching, m)?)?;
    m.add_function(wrap_pyfunction!(solve_power, m)?)?;
    m.add_function(wrap_pyfunction!(solve_alternating, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_round_trip() {
        let t = Tensor3::from_fn([2, 3, 4], |u, b, k| (u * 100 + b * 10 + k) as f64);
        assert_eq!(tensor(nested(&t)).unwrap(), t);
    }

    #[test]
    fn ragged_gain_rejected() {
        assert!(tensor(vec![vec![vec![1.0, 2.0]], vec![vec![1.0]]]).is_err());
    }

    #[test]
    fn view_shape_checks() {
        let gain = vec![vec![vec![1.0; 2]; 3]];
        assert!(cell_view(gain.clone(), vec![vec![1.0; 2]; 3], vec![1.0; 2], vec![1.0]).is_ok());
        assert!(cell_view(gain, vec![vec![1.0; 2]; 3], vec![1.0; 2], vec![1.0, 2.0]).is_err());
    }
}
