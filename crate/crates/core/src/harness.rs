//! Seeded Monte Carlo sweeps over clustering method × affiliation rule ×
//! allocation scheme × number of virtual cells.
//!
//! # Seeding
//!
//! Every random draw of trial `t` comes from a ChaCha8 generator keyed by
//! `master_seed` (via `seed_from_u64`) with stream id `(t << 32) | purpose`:
//! purpose 0 generates the deployment and channels, purpose
//! `slot·65536 + m` drives the randomized clustering method in `slot` at `m`
//! cells (slot 1 is K-means, slot `2 + i` is spectral with the `i`-th σ).
//! Trials therefore do not depend on one another, on which other methods are
//! enabled, or on the order in which a thread pool runs them.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{alternating_solve, AllocationRule, AlternatingSettings};
use crate::clustering::{cut_dendrogram, hierarchical_cluster, kmeans_cluster, spectral_cluster, Clustering};
use crate::power::{solve_power_continuous, SolverSettings};
use crate::rate::{system_sum_rate, CellSolution, CellView, EvalMode, PowerMatrix};
use crate::scenario::{generate_channels, generate_deployment, ChannelRealization, ConfigError, Deployment, SystemConfig};
use crate::stats::Summary;
use crate::virtual_cells::{
    affiliate_best_channel, affiliate_closest, validate_partition, Affiliation, ChannelQuality, VirtualCell,
    VirtualCellPartition,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    System(#[from] ConfigError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error on {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Continuous,
    Uc,
    Bsc,
    Msrm,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Continuous, Scheme::Uc, Scheme::Bsc, Scheme::Msrm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Continuous => "continuous",
            Scheme::Uc => "uc",
            Scheme::Bsc => "bsc",
            Scheme::Msrm => "msrm",
        }
    }

    fn rule(&self) -> Option<AllocationRule> {
        match self {
            Scheme::Continuous => None,
            Scheme::Uc => Some(AllocationRule::Uc),
            Scheme::Bsc => Some(AllocationRule::Bsc),
            Scheme::Msrm => Some(AllocationRule::Msrm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusteringKind {
    Hierarchical,
    Kmeans,
    Spectral,
}

impl ClusteringKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClusteringKind::Hierarchical => "hierarchical",
            ClusteringKind::Kmeans => "kmeans",
            ClusteringKind::Spectral => "spectral",
        }
    }
}

/// A clustering method with its parameter, as swept by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringSpec {
    pub kind: ClusteringKind,
    pub sigma: Option<f64>,
    slot: u64,
}

pub const DEFAULT_SIGMAS: [f64; 2] = [31.622_776_601_683_793, 1000.0];

fn all_affiliations() -> Vec<Affiliation> {
    vec![Affiliation::Closest, Affiliation::BestChannel]
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_clusterings() -> Vec<ClusteringKind> {
    vec![ClusteringKind::Hierarchical]
}

fn default_sigmas() -> Vec<f64> {
    DEFAULT_SIGMAS.to_vec()
}

fn default_trials() -> usize {
    100
}

fn default_eval() -> EvalMode {
    EvalMode::Global
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Numbers of virtual cells to evaluate; empty means `1..=num_bs`.
    #[serde(default)]
    pub cell_counts: Vec<usize>,
    #[serde(default = "default_clusterings")]
    pub clusterings: Vec<ClusteringKind>,
    /// Spectral clustering bandwidths, meters; one sweep per value.
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "all_affiliations")]
    pub affiliations: Vec<Affiliation>,
    #[serde(default)]
    pub best_channel_quality: ChannelQuality,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_eval")]
    pub eval_mode: EvalMode,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub alternating: AlternatingSettings,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub threads: usize,
}

impl ExperimentConfig {
    /// Desk-scale preset: default system, every method, 100 trials.
    pub fn desk() -> Self {
        ExperimentConfig {
            system: SystemConfig::default(),
            trials: 100,
            master_seed: 1,
            cell_counts: Vec::new(),
            clusterings: vec![ClusteringKind::Hierarchical, ClusteringKind::Kmeans, ClusteringKind::Spectral],
            sigmas: default_sigmas(),
            affiliations: all_affiliations(),
            best_channel_quality: ChannelQuality::default(),
            schemes: all_schemes(),
            eval_mode: EvalMode::Global,
            solver: SolverSettings::default(),
            alternating: AlternatingSettings::default(),
            threads: 0,
        }
    }

    /// Full-scale preset: as [`ExperimentConfig::desk`] with 1000 trials.
    pub fn full() -> Self {
        ExperimentConfig { trials: 1000, ..Self::desk() }
    }

    /// Parses either an experiment document (an object with a `system` key)
    /// or a bare system configuration, which gets default experiment settings.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let cfg = if value.get("system").is_some() {
            serde_json::from_value(value).map_err(|e| HarnessError::Config(e.to_string()))?
        } else {
            let system: SystemConfig =
                serde_json::from_value(value).map_err(|e| HarnessError::Config(e.to_string()))?;
            ExperimentConfig { system, ..Self::desk() }
        };
        Ok(cfg)
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        if self.cell_counts.is_empty() {
            (1..=self.system.num_bs).collect()
        } else {
            self.cell_counts.clone()
        }
    }

    pub fn clustering_specs(&self) -> Vec<ClusteringSpec> {
        let mut out = Vec::new();
        for kind in &self.clusterings {
            match kind {
                ClusteringKind::Hierarchical => out.push(ClusteringSpec { kind: *kind, sigma: None, slot: 0 }),
                ClusteringKind::Kmeans => out.push(ClusteringSpec { kind: *kind, sigma: None, slot: 1 }),
                ClusteringKind::Spectral => {
                    for (i, s) in self.sigmas.iter().enumerate() {
                        out.push(ClusteringSpec { kind: *kind, sigma: Some(*s), slot: 2 + i as u64 });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.system.validate()?;
        self.solver.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.trials > u32::MAX as usize {
            return Err(HarnessError::Config("too many trials".into()));
        }
        if let Some(m) = self.cell_counts().iter().find(|&&m| m == 0 || m > self.system.num_bs) {
            return Err(HarnessError::Config(format!(
                "cell count {m} outside [1, {}]",
                self.system.num_bs
            )));
        }
        if self.clusterings.is_empty() || self.affiliations.is_empty() || self.schemes.is_empty() {
            return Err(HarnessError::Config(
                "clusterings, affiliations and schemes must be nonempty".into(),
            ));
        }
        if self.clusterings.contains(&ClusteringKind::Spectral) {
            if self.sigmas.is_empty() {
                return Err(HarnessError::Config("spectral clustering needs at least one sigma".into()));
            }
            if let Some(s) = self.sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                return Err(HarnessError::Config(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.alternating.delta > 0.0) || self.alternating.n_max == 0 {
            return Err(HarnessError::Config("alternating delta must be > 0 and n_max >= 1".into()));
        }
        Ok(())
    }
}

/// Random stream of trial `trial` for the given purpose (see module docs).
pub fn trial_rng(master_seed: u64, trial: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((trial as u64) << 32) | purpose);
    rng
}

/// One (clustering, affiliation, scheme, m) result of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub clustering: ClusteringKind,
    pub sigma: Option<f64>,
    pub affiliation: Affiliation,
    pub scheme: Scheme,
    pub num_cells: usize,
    pub eval_mode: EvalMode,
    pub sum_rate_bps: f64,
    pub converged: bool,
    /// Largest per-cell iteration count (surrogate refits or alternating rounds).
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub clustering: ClusteringKind,
    pub sigma: Option<f64>,
    pub num_cells: usize,
    pub scheme: Option<Scheme>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub rows: Vec<TrialRow>,
    pub failures: Vec<TrialFailure>,
}

/// Everything a trial needs besides the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScenario {
    pub deployment: Deployment,
    pub channels: ChannelRealization,
}

pub fn trial_scenario(cfg: &ExperimentConfig, trial_index: usize) -> TrialScenario {
    let mut rng = trial_rng(cfg.master_seed, trial_index, 0);
    let deployment = generate_deployment(&cfg.system, &mut rng);
    let channels = generate_channels(&cfg.system, &deployment, &mut rng);
    TrialScenario { deployment, channels }
}

#[derive(Debug, Clone)]
struct SolvedCell {
    solution: CellSolution,
    converged: bool,
    iterations: usize,
}

/// Per-trial memo of solved cells. A cell's solution depends only on its BS
/// and user sets, so cells shared between cut levels or clustering methods
/// are solved once.
#[derive(Default)]
struct CellCache {
    map: HashMap<(Scheme, VirtualCell), SolvedCell>,
}

fn solve_cell(
    cfg: &ExperimentConfig,
    chan: &ChannelRealization,
    band_widths: &[f64],
    budgets: &[f64],
    cell: &VirtualCell,
    scheme: Scheme,
) -> Result<SolvedCell, String> {
    let view = CellView::new(cell, chan, band_widths, budgets);
    if cell.users.is_empty() {
        return Ok(SolvedCell {
            solution: CellSolution { power: PowerMatrix::zeros(view.dims()), gamma: None },
            converged: true,
            iterations: 0,
        });
    }
    match scheme.rule() {
        None => {
            let sol = solve_power_continuous(&view, &cfg.solver, None).map_err(|e| e.to_string())?;
            Ok(SolvedCell {
                solution: CellSolution { power: sol.power, gamma: None },
                converged: sol.converged,
                iterations: sol.outer_iterations,
            })
        }
        Some(rule) => {
            let out = alternating_solve(&view, rule, &cfg.alternating, &cfg.solver).map_err(|e| e.to_string())?;
            Ok(SolvedCell {
                solution: CellSolution { power: out.power, gamma: Some(out.gamma) },
                converged: !out.hit_n_max,
                iterations: out.iterations,
            })
        }
    }
}

/// BS clusterings of one trial for every (method, m); errors are kept per entry.
pub fn trial_clusterings(
    cfg: &ExperimentConfig,
    trial_index: usize,
    dep: &Deployment,
) -> Vec<(ClusteringSpec, usize, Result<Clustering, String>)> {
    let specs = cfg.clustering_specs();
    let counts = cfg.cell_counts();
    let mut out = Vec::new();
    for spec in specs {
        let dendrogram = (spec.kind == ClusteringKind::Hierarchical).then(|| hierarchical_cluster(&dep.bs_positions));
        for &m in &counts {
            let purpose = spec.slot * 65536 + m as u64;
            let result = match spec.kind {
                ClusteringKind::Hierarchical => {
                    cut_dendrogram(dendrogram.as_ref().expect("built above"), m).map_err(|e| e.to_string())
                }
                ClusteringKind::Kmeans => {
                    let mut rng = trial_rng(cfg.master_seed, trial_index, purpose);
                    kmeans_cluster(&dep.bs_positions, m, &mut rng).map_err(|e| e.to_string())
                }
                ClusteringKind::Spectral => {
                    let mut rng = trial_rng(cfg.master_seed, trial_index, purpose);
                    let sigma = spec.sigma.expect("spectral spec carries sigma");
                    spectral_cluster(&dep.bs_positions, m, sigma, &mut rng).map_err(|e| e.to_string())
                }
            };
            out.push((spec, m, result));
        }
    }
    out
}

pub fn affiliate(
    cfg: &ExperimentConfig,
    rule: Affiliation,
    scenario: &TrialScenario,
    clustering: &Clustering,
) -> VirtualCellPartition {
    match rule {
        Affiliation::Closest => affiliate_closest(&scenario.deployment, clustering),
        Affiliation::BestChannel => affiliate_best_channel(&scenario.channels, clustering, cfg.best_channel_quality),
    }
}

/// Runs every configured combination on trial `trial_index`.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: usize) -> TrialResult {
    let scenario = trial_scenario(cfg, trial_index);
    let band_widths = cfg.system.band_widths();
    let budgets = cfg.system.budgets_mw();
    let chan = &scenario.channels;
    let mut cache = CellCache::default();
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    for (spec, m, clustering) in trial_clusterings(cfg, trial_index, &scenario.deployment) {
        let clustering = match clustering {
            Ok(c) => c,
            Err(message) => {
                failures.push(TrialFailure {
                    clustering: spec.kind,
                    sigma: spec.sigma,
                    num_cells: m,
                    scheme: None,
                    message,
                });
                continue;
            }
        };
        for &rule in &cfg.affiliations {
            let partition = affiliate(cfg, rule, &scenario, &clustering);
            debug_assert_eq!(validate_partition(&partition, cfg.system.num_bs, cfg.system.num_users), Ok(()));
            'schemes: for &scheme in &cfg.schemes {
                let mut solutions = Vec::with_capacity(partition.m());
                let mut converged = true;
                let mut iterations = 0;
                for cell in &partition.cells {
                    let key = (scheme, cell.clone());
                    let solved = match cache.map.get(&key) {
                        Some(s) => s.clone(),
                        None => match solve_cell(cfg, chan, &band_widths, &budgets, cell, scheme) {
                            Ok(s) => {
                                cache.map.insert(key, s.clone());
                                s
                            }
                            Err(message) => {
                                failures.push(TrialFailure {
                                    clustering: spec.kind,
                                    sigma: spec.sigma,
                                    num_cells: m,
                                    scheme: Some(scheme),
                                    message,
                                });
                                continue 'schemes;
                            }
                        },
                    };
                    converged &= solved.converged;
                    iterations = iterations.max(solved.iterations);
                    solutions.push(solved.solution);
                }
                let sum_rate = system_sum_rate(&partition, chan, &band_widths, &solutions, cfg.eval_mode);
                rows.push(TrialRow {
                    trial: trial_index,
                    clustering: spec.kind,
                    sigma: spec.sigma,
                    affiliation: rule,
                    scheme,
                    num_cells: m,
                    eval_mode: cfg.eval_mode,
                    sum_rate_bps: sum_rate,
                    converged,
                    iterations,
                });
            }
        }
    }
    TrialResult { trial_index, rows, failures }
}

/// Grouping key of an aggregate row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigKey {
    pub clustering: ClusteringKind,
    pub sigma: Option<f64>,
    pub affiliation: Affiliation,
    pub scheme: Scheme,
    pub num_cells: usize,
    pub eval_mode: EvalMode,
}

impl ConfigKey {
    pub fn of(row: &TrialRow) -> Self {
        ConfigKey {
            clustering: row.clustering,
            sigma: row.sigma,
            affiliation: row.affiliation,
            scheme: row.scheme,
            num_cells: row.num_cells,
            eval_mode: row.eval_mode,
        }
    }

    fn hashable(&self) -> (ClusteringKind, Option<u64>, Affiliation, Scheme, usize, EvalMode) {
        (
            self.clustering,
            self.sigma.map(f64::to_bits),
            self.affiliation,
            self.scheme,
            self.num_cells,
            self.eval_mode,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub key: ConfigKey,
    pub summary: Summary,
}

/// Groups rows by configuration in order of first appearance.
pub fn aggregate(trials: &[TrialResult]) -> Vec<AggregateRow> {
    let mut index = HashMap::new();
    let mut groups: Vec<(ConfigKey, Vec<f64>)> = Vec::new();
    for t in trials {
        for row in &t.rows {
            let key = ConfigKey::of(row);
            let slot = *index.entry(key.hashable()).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(row.sum_rate_bps);
        }
    }
    groups
        .into_iter()
        .map(|(key, values)| AggregateRow { key, summary: Summary::of(&values) })
        .collect()
}

pub const RAW_HEADER: [&str; 9] = [
    "trial",
    "clustering",
    "sigma",
    "affiliation",
    "scheme",
    "num_cells",
    "eval_mode",
    "sum_rate_bps",
    "converged",
];

pub const AGG_HEADER: [&str; 10] = [
    "clustering",
    "sigma",
    "affiliation",
    "scheme",
    "num_cells",
    "eval_mode",
    "mean_bps",
    "std_bps",
    "stderr_bps",
    "trials",
];

/// Raw CSV record, field order as in [`RAW_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub trial: usize,
    pub clustering: ClusteringKind,
    pub sigma: Option<f64>,
    pub affiliation: Affiliation,
    pub scheme: Scheme,
    pub num_cells: usize,
    pub eval_mode: EvalMode,
    pub sum_rate_bps: f64,
    pub converged: bool,
}

impl From<&TrialRow> for RawRecord {
    fn from(r: &TrialRow) -> Self {
        RawRecord {
            trial: r.trial,
            clustering: r.clustering,
            sigma: r.sigma,
            affiliation: r.affiliation,
            scheme: r.scheme,
            num_cells: r.num_cells,
            eval_mode: r.eval_mode,
            sum_rate_bps: r.sum_rate_bps,
            converged: r.converged,
        }
    }
}

/// Aggregate CSV record, field order as in [`AGG_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub clustering: ClusteringKind,
    pub sigma: Option<f64>,
    pub affiliation: Affiliation,
    pub scheme: Scheme,
    pub num_cells: usize,
    pub eval_mode: EvalMode,
    pub mean_bps: f64,
    pub std_bps: f64,
    pub stderr_bps: f64,
    pub trials: usize,
}

impl From<&AggregateRow> for AggregateRecord {
    fn from(a: &AggregateRow) -> Self {
        AggregateRecord {
            clustering: a.key.clustering,
            sigma: a.key.sigma,
            affiliation: a.key.affiliation,
            scheme: a.key.scheme,
            num_cells: a.key.num_cells,
            eval_mode: a.key.eval_mode,
            mean_bps: a.summary.mean,
            std_bps: a.summary.std,
            stderr_bps: a.summary.stderr,
            trials: a.summary.n,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

fn create_file(path: &Path) -> Result<File, HarnessError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    File::create(path).map_err(io_err(path))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.display().to_string(), source }
}

/// Incremental writer for the raw CSV; the header is written on creation.
pub struct RawCsvWriter {
    path: std::path::PathBuf,
    inner: csv::Writer<File>,
}

impl RawCsvWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = create_file(path)?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        inner.write_record(RAW_HEADER).map_err(csv_err(path))?;
        inner.flush().map_err(io_err(path))?;
        Ok(RawCsvWriter { path: path.to_path_buf(), inner })
    }

    pub fn append(&mut self, rows: &[TrialRow]) -> Result<(), HarnessError> {
        for r in rows {
            self.inner.serialize(RawRecord::from(r)).map_err(csv_err(&self.path))?;
        }
        self.inner.flush().map_err(io_err(&self.path))
    }
}

pub fn write_raw_csv(rows: &[TrialRow], path: &Path) -> Result<(), HarnessError> {
    RawCsvWriter::create(path)?.append(rows)
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), HarnessError> {
    let file = create_file(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(AGG_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(AggregateRecord::from(r)).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<RawRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub aggregate: Vec<AggregateRow>,
}

/// Output locations of [`run_experiment`].
#[derive(Debug, Clone, Default)]
pub struct OutputPaths<'a> {
    pub raw: Option<&'a Path>,
    pub aggregate: Option<&'a Path>,
}

/// Runs all trials on a thread pool and aggregates them. Raw rows are
/// appended to the raw CSV batch by batch, in trial order.
pub fn run_experiment(cfg: &ExperimentConfig, out: &OutputPaths) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    let mut raw = out.raw.map(RawCsvWriter::create).transpose()?;
    let batch = pool.current_num_threads().max(1) * 4;
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut start = 0;
    while start < cfg.trials {
        let end = (start + batch).min(cfg.trials);
        let done: Vec<TrialResult> = pool.install(|| (start..end).into_par_iter().map(|t| run_trial(cfg, t)).collect());
        if let Some(w) = raw.as_mut() {
            for t in &done {
                w.append(&t.rows)?;
            }
        }
        trials.extend(done);
        start = end;
    }
    let aggregate = aggregate(&trials);
    if let Some(path) = out.aggregate {
        write_aggregate_csv(&aggregate, path)?;
    }
    Ok(ExperimentResult { trials, aggregate })
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = create_file(path)?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
