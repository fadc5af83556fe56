//! Declarative, seeded experiment runner behind the CLI.
//!
//! Experiments are described by a TOML file with the grammar
//!
//! ```toml
//! kind = "wdc_sweep"        # one of: wdc_sweep | recovery_sweep |
//!                           #   expansion_phase | collision_demo |
//!                           #   net_demo | rric_sweep | landscape
//! master_seed = 7           # optional, default 0 (overridable via --seed)
//! trial_count = 20          # optional, default 1; trials per grid cell
//!
//! [params]                  # kind-specific keys, see the param structs
//! k = 10
//! n_grid = [20, 100, 1000]
//! ```
//!
//! Unknown keys anywhere are rejected, as are semantically invalid values
//! (empty grids, zero counts, out-of-range reals) — before any trial runs.
//!
//! Every trial gets its own RNG stream seeded by the splittable hash
//! `derive_seed(master_seed, kind_tag, row_index)`, so reports are
//! byte-identical across re-runs and across worker thread counts. Rows come
//! out ordered by (grid position, trial index): the global row index is
//! `cell_index * trial_count + trial`. Per-trial failures are recorded in
//! the row (`ok = false`, message in `error`) and never abort the sweep.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{Map, Value};
use std::path::Path;
use thiserror::Error;

use crate::network::{construct_collision, sample_gaussian_network, VarianceRule};
use crate::pseudolip::{
    build_aspherical_net, default_scan_size, net_scan_points, net_size_bound, PseudoBallSpec,
};
use crate::recover::{
    default_step_size, landscape_scan, measure, recover, rric_deviation, MeasurementModel,
    RecoveryConfig, ScanMode,
};
use crate::sampling::{derive_seed, gaussian_matrix, rng_from_seed, unit_vector};
use crate::wdc::{sample_direction_pairs, wdc_deviation};

const TAG_WDC_SWEEP: u64 = 0x4857_4443;
const TAG_RECOVERY_SWEEP: u64 = 0x4852_4543;
const TAG_EXPANSION_PHASE: u64 = 0x4845_5850;
const TAG_COLLISION_DEMO: u64 = 0x4843_4F4C;
const TAG_NET_DEMO: u64 = 0x484E_4554;
const TAG_RRIC_SWEEP: u64 = 0x4852_5243;
const TAG_LANDSCAPE: u64 = 0x484C_414E;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Schema(String),
    #[error("report has no rows")]
    EmptyReport,
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn schema(msg: impl Into<String>) -> HarnessError {
    HarnessError::Schema(msg.into())
}

/// One typed cell of a report row. `Empty` renders as an empty CSV field and
/// JSON `null`; it fills measured-output columns on failed trials.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    UInt(u64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl CellValue {
    fn csv(&self) -> String {
        match self {
            CellValue::UInt(u) => u.to_string(),
            CellValue::Float(f) => format!("{f}"),
            CellValue::Bool(b) => b.to_string(),
            CellValue::Text(s) => escape_csv(s),
            CellValue::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            CellValue::UInt(u) => (*u).into(),
            CellValue::Float(f) => serde_json::Number::from_f64(*f)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            CellValue::Bool(b) => (*b).into(),
            CellValue::Text(s) => s.clone().into(),
            CellValue::Empty => Value::Null,
        }
    }
}

fn escape_csv(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One flat record per trial: identification, swept parameters, measured
/// outputs, and an ok/error pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    columns: Vec<(&'static str, CellValue)>,
}

impl ReportRow {
    pub fn new() -> Self {
        Self { columns: Vec::new() }
    }

    pub fn push(&mut self, name: &'static str, value: CellValue) {
        self.columns.push((name, value));
    }

    pub fn get(&self, name: &str) -> Option<&CellValue> {
        self.columns
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v)
    }

    pub fn float(&self, name: &str) -> Option<f64> {
        match self.get(name)? {
            CellValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn uint(&self, name: &str) -> Option<u64> {
        match self.get(name)? {
            CellValue::UInt(u) => Some(*u),
            _ => None,
        }
    }

    pub fn boolean(&self, name: &str) -> Option<bool> {
        match self.get(name)? {
            CellValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        match self.get(name)? {
            CellValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.get("ok"), Some(CellValue::Bool(true)))
    }

    pub fn column_names(&self) -> Vec<&'static str> {
        self.columns.iter().map(|(n, _)| *n).collect()
    }
}

impl Default for ReportRow {
    fn default() -> Self {
        Self::new()
    }
}

/// Weight-distribution deviation across output sizes.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WdcSweepParams {
    pub k: usize,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_true")]
    pub normalized: bool,
}

/// Descent recovery across measurement counts and relative noise levels.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySweepParams {
    /// Network dimensions, latent first.
    pub dims: Vec<usize>,
    pub m_grid: Vec<usize>,
    /// Noise norms relative to the clean observation norm; 0 is noiseless.
    #[serde(default = "default_noise_grid")]
    pub noise_grid: Vec<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Multiplier over the conservative default step size.
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub gradient_tolerance: f64,
}

/// Noiseless recovery success as the hidden layer expands.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionPhaseParams {
    pub k: usize,
    pub n_grid: Vec<usize>,
    pub m: usize,
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
    #[serde(default = "default_phase_restarts")]
    pub restarts: usize,
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    #[serde(default = "default_phase_iterations")]
    pub max_iterations: usize,
}

/// Collision construction at the expansivity boundary m = 2k - 1.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionDemoParams {
    pub k_grid: Vec<usize>,
}

/// Aspherical net construction on a seeded slab pseudo-ball.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetDemoParams {
    pub k: usize,
    pub delta: f64,
    /// Slab half-width.
    pub epsilon: f64,
    /// Sphere scan/test points; defaults to 10_000 * k.
    #[serde(default)]
    pub sphere_test_points: Option<usize>,
}

/// Range-restricted isometry deviation across measurement counts.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RricSweepParams {
    pub dims: Vec<usize>,
    pub m_grid: Vec<usize>,
    #[serde(default = "default_quadruples")]
    pub quadruples: usize,
}

/// Multi-start landscape census on a seeded instance.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeParams {
    pub dims: Vec<usize>,
    pub m: usize,
    #[serde(default = "default_landscape_starts")]
    pub starts: usize,
    #[serde(default = "default_step_scale")]
    pub step_scale: f64,
    #[serde(default = "default_landscape_iterations")]
    pub max_iterations: usize,
}

fn default_pairs() -> usize {
    500
}
fn default_true() -> bool {
    true
}
fn default_noise_grid() -> Vec<f64> {
    vec![0.0]
}
fn default_restarts() -> usize {
    10
}
fn default_step_scale() -> f64 {
    10.0
}
fn default_max_iterations() -> usize {
    2000
}
fn default_tolerance() -> f64 {
    1e-9
}
fn default_success_threshold() -> f64 {
    1e-2
}
fn default_phase_restarts() -> usize {
    5
}
fn default_phase_iterations() -> usize {
    1500
}
fn default_quadruples() -> usize {
    200
}
fn default_landscape_starts() -> usize {
    200
}
fn default_landscape_iterations() -> usize {
    800
}

#[derive(Debug, Clone)]
pub enum ExperimentKind {
    WdcSweep(WdcSweepParams),
    RecoverySweep(RecoverySweepParams),
    ExpansionPhase(ExpansionPhaseParams),
    CollisionDemo(CollisionDemoParams),
    NetDemo(NetDemoParams),
    RricSweep(RricSweepParams),
    Landscape(LandscapeParams),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WdcSweep(_) => "wdc_sweep",
            Self::RecoverySweep(_) => "recovery_sweep",
            Self::ExpansionPhase(_) => "expansion_phase",
            Self::CollisionDemo(_) => "collision_demo",
            Self::NetDemo(_) => "net_demo",
            Self::RricSweep(_) => "rric_sweep",
            Self::Landscape(_) => "landscape",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub trial_count: usize,
}

fn check_dims(dims: &[usize]) -> Result<(), HarnessError> {
    if dims.len() < 2 {
        return Err(schema("dims needs at least a latent and an output size"));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(schema("dims entries must be positive"));
    }
    Ok(())
}

fn check_grid<T>(grid: &[T], name: &str) -> Result<(), HarnessError> {
    if grid.is_empty() {
        return Err(schema(format!("{name} must be nonempty")));
    }
    Ok(())
}

fn check_positive(value: f64, name: &str) -> Result<(), HarnessError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(schema(format!("{name} must be positive and finite")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trial_count == 0 {
            return Err(schema("trial_count must be at least 1"));
        }
        match &self.kind {
            ExperimentKind::WdcSweep(p) => {
                if p.k == 0 || p.pairs == 0 {
                    return Err(schema("wdc_sweep needs k >= 1 and pairs >= 1"));
                }
                check_grid(&p.n_grid, "n_grid")?;
                if p.n_grid.iter().any(|&n| n == 0) {
                    return Err(schema("n_grid entries must be positive"));
                }
            }
            ExperimentKind::RecoverySweep(p) => {
                check_dims(&p.dims)?;
                check_grid(&p.m_grid, "m_grid")?;
                if p.m_grid.iter().any(|&m| m == 0) {
                    return Err(schema("m_grid entries must be positive"));
                }
                check_grid(&p.noise_grid, "noise_grid")?;
                if p.noise_grid.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(schema("noise_grid entries must be finite and >= 0"));
                }
                if p.restarts == 0 || p.max_iterations == 0 {
                    return Err(schema("restarts and max_iterations must be positive"));
                }
                check_positive(p.step_scale, "step_scale")?;
                check_positive(p.gradient_tolerance, "gradient_tolerance")?;
            }
            ExperimentKind::ExpansionPhase(p) => {
                if p.k == 0 || p.m == 0 || p.restarts == 0 || p.max_iterations == 0 {
                    return Err(schema(
                        "expansion_phase needs positive k, m, restarts, max_iterations",
                    ));
                }
                check_grid(&p.n_grid, "n_grid")?;
                if p.n_grid.iter().any(|&n| n == 0) {
                    return Err(schema("n_grid entries must be positive"));
                }
                check_positive(p.success_threshold, "success_threshold")?;
                check_positive(p.step_scale, "step_scale")?;
            }
            ExperimentKind::CollisionDemo(p) => {
                check_grid(&p.k_grid, "k_grid")?;
                if p.k_grid.iter().any(|&k| k == 0) {
                    return Err(schema("k_grid entries must be positive"));
                }
            }
            ExperimentKind::NetDemo(p) => {
                if !(1..=6).contains(&p.k) {
                    return Err(schema("net_demo needs 1 <= k <= 6"));
                }
                if !(p.delta > 0.0 && p.delta < 1.0) {
                    return Err(schema("delta must lie strictly inside (0, 1)"));
                }
                check_positive(p.epsilon, "epsilon")?;
                if p.sphere_test_points == Some(0) {
                    return Err(schema("sphere_test_points must be positive"));
                }
            }
            ExperimentKind::RricSweep(p) => {
                check_dims(&p.dims)?;
                check_grid(&p.m_grid, "m_grid")?;
                if p.m_grid.iter().any(|&m| m == 0) {
                    return Err(schema("m_grid entries must be positive"));
                }
                if p.quadruples == 0 {
                    return Err(schema("quadruples must be positive"));
                }
            }
            ExperimentKind::Landscape(p) => {
                check_dims(&p.dims)?;
                if p.m == 0 || p.starts == 0 || p.max_iterations == 0 {
                    return Err(schema("landscape needs positive m, starts, max_iterations"));
                }
                check_positive(p.step_scale, "step_scale")?;
            }
        }
        Ok(())
    }
}

/// Parses and validates an experiment description; see the module docs for
/// the grammar.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let table: toml::Table = text.parse()?;
    for key in table.keys() {
        if !["kind", "master_seed", "trial_count", "params"].contains(&key.as_str()) {
            return Err(schema(format!("unknown top-level key `{key}`")));
        }
    }
    let kind_name = table
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| schema("missing required string key `kind`"))?
        .to_string();
    let master_seed = match table.get("master_seed") {
        None => 0,
        Some(v) => {
            let i = v
                .as_integer()
                .ok_or_else(|| schema("master_seed must be an integer"))?;
            u64::try_from(i).map_err(|_| schema("master_seed must be nonnegative"))?
        }
    };
    let trial_count = match table.get("trial_count") {
        None => 1,
        Some(v) => {
            let i = v
                .as_integer()
                .ok_or_else(|| schema("trial_count must be an integer"))?;
            usize::try_from(i).map_err(|_| schema("trial_count must be nonnegative"))?
        }
    };
    let params = table
        .get("params")
        .cloned()
        .unwrap_or(toml::Value::Table(toml::Table::new()));
    let bad_params =
        |e: toml::de::Error| schema(format!("invalid [params] for {kind_name}: {e}"));
    let kind = match kind_name.as_str() {
        "wdc_sweep" => ExperimentKind::WdcSweep(params.try_into().map_err(bad_params)?),
        "recovery_sweep" => ExperimentKind::RecoverySweep(params.try_into().map_err(bad_params)?),
        "expansion_phase" => {
            ExperimentKind::ExpansionPhase(params.try_into().map_err(bad_params)?)
        }
        "collision_demo" => ExperimentKind::CollisionDemo(params.try_into().map_err(bad_params)?),
        "net_demo" => ExperimentKind::NetDemo(params.try_into().map_err(bad_params)?),
        "rric_sweep" => ExperimentKind::RricSweep(params.try_into().map_err(bad_params)?),
        "landscape" => ExperimentKind::Landscape(params.try_into().map_err(bad_params)?),
        other => return Err(schema(format!("unknown experiment kind `{other}`"))),
    };
    let config = ExperimentConfig {
        kind,
        master_seed,
        trial_count,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Fills a row's tail: measured outputs on success, `Empty` placeholders plus
/// the error message on failure. Keeps the column set identical either way.
fn finish_row(
    mut row: ReportRow,
    output_columns: &[&'static str],
    outcome: Result<Vec<CellValue>, String>,
) -> ReportRow {
    match outcome {
        Ok(values) => {
            debug_assert_eq!(values.len(), output_columns.len());
            for (name, value) in output_columns.iter().zip(values) {
                row.push(name, value);
            }
            row.push("ok", CellValue::Bool(true));
            row.push("error", CellValue::Text(String::new()));
        }
        Err(message) => {
            for name in output_columns {
                row.push(name, CellValue::Empty);
            }
            row.push("ok", CellValue::Bool(false));
            row.push("error", CellValue::Text(message));
        }
    }
    row
}

/// Runs all trials of the configured experiment. Rows are generated by
/// index over (grid cell, trial), so their order and content are independent
/// of the worker pool's schedule.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRow>, HarnessError> {
    config.validate()?;
    let rows = match &config.kind {
        ExperimentKind::WdcSweep(p) => run_wdc_sweep(config, p),
        ExperimentKind::RecoverySweep(p) => run_recovery_sweep(config, p),
        ExperimentKind::ExpansionPhase(p) => run_expansion_phase(config, p),
        ExperimentKind::CollisionDemo(p) => run_collision_demo(config, p),
        ExperimentKind::NetDemo(p) => run_net_demo(config, p),
        ExperimentKind::RricSweep(p) => run_rric_sweep(config, p),
        ExperimentKind::Landscape(p) => run_landscape(config, p),
    };
    Ok(rows)
}

fn run_wdc_sweep(cfg: &ExperimentConfig, p: &WdcSweepParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    let total = p.n_grid.len() * trials;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let n = p.n_grid[idx / trials];
            let seed = derive_seed(cfg.master_seed, TAG_WDC_SWEEP, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("wdc_sweep".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("k", CellValue::UInt(p.k as u64));
            row.push("n", CellValue::UInt(n as u64));
            row.push("pairs", CellValue::UInt(p.pairs as u64));
            let outcome = (|| {
                let mut rng = rng_from_seed(seed);
                let w = gaussian_matrix(n, p.k, 1.0, &mut rng);
                let pairs = sample_direction_pairs(p.k, p.pairs, derive_seed(seed, 1, 0));
                let report =
                    wdc_deviation(&w, &pairs, p.normalized).map_err(|e| e.to_string())?;
                Ok(vec![
                    CellValue::Float(report.max_deviation),
                    CellValue::UInt(report.pairs_tested as u64),
                ])
            })();
            finish_row(row, &["max_deviation", "pairs_tested"], outcome)
        })
        .collect()
}

fn run_recovery_sweep(cfg: &ExperimentConfig, p: &RecoverySweepParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    let cells: Vec<(usize, f64)> = p
        .m_grid
        .iter()
        .flat_map(|&m| p.noise_grid.iter().map(move |&noise| (m, noise)))
        .collect();
    let total = cells.len() * trials;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let (m, noise) = cells[idx / trials];
            let seed = derive_seed(cfg.master_seed, TAG_RECOVERY_SWEEP, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("recovery_sweep".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("m", CellValue::UInt(m as u64));
            row.push("noise", CellValue::Float(noise));
            let outcome = (|| {
                let net =
                    sample_gaussian_network(&p.dims, VarianceRule::OneOverRows, derive_seed(seed, 1, 0))
                        .map_err(|e| e.to_string())?;
                let n = net.output_dim();
                let k = net.latent_dim();
                let mut rng = rng_from_seed(derive_seed(seed, 2, 0));
                let a = gaussian_matrix(m, n, 1.0 / m as f64, &mut rng);
                let x_star = unit_vector(k, &mut rng);
                let model = if noise == 0.0 {
                    MeasurementModel::Linear { a }
                } else {
                    let clean = &a * net.forward(&x_star).map_err(|e| e.to_string())?;
                    let direction = unit_vector(m, &mut rng);
                    MeasurementModel::NoisyLinear {
                        a,
                        e: direction * (noise * clean.norm()),
                    }
                };
                let y = measure(&model, &net, &x_star).map_err(|e| e.to_string())?;
                let rc = RecoveryConfig {
                    step_size: Some(p.step_scale * default_step_size(&net, model.matrix())),
                    max_iterations: p.max_iterations,
                    gradient_tolerance: p.gradient_tolerance,
                    negation_check: true,
                    restarts: p.restarts,
                    init_seed: derive_seed(seed, 3, 0),
                };
                let result =
                    recover(&net, &model, &y, &rc, Some(&x_star)).map_err(|e| e.to_string())?;
                Ok(vec![
                    CellValue::Float(result.relative_error.unwrap_or(f64::NAN)),
                    CellValue::Float(result.loss),
                    CellValue::Bool(result.converged),
                    CellValue::Bool(result.diverged),
                    CellValue::UInt(result.loss_trace.len().saturating_sub(1) as u64),
                ])
            })();
            finish_row(
                row,
                &["relative_error", "loss", "converged", "diverged", "iterations"],
                outcome,
            )
        })
        .collect()
}

fn run_expansion_phase(cfg: &ExperimentConfig, p: &ExpansionPhaseParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    let total = p.n_grid.len() * trials;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let n = p.n_grid[idx / trials];
            let seed = derive_seed(cfg.master_seed, TAG_EXPANSION_PHASE, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("expansion_phase".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("k", CellValue::UInt(p.k as u64));
            row.push("n", CellValue::UInt(n as u64));
            row.push("m", CellValue::UInt(p.m as u64));
            let outcome = (|| {
                let net = sample_gaussian_network(
                    &[p.k, n],
                    VarianceRule::OneOverRows,
                    derive_seed(seed, 1, 0),
                )
                .map_err(|e| e.to_string())?;
                let mut rng = rng_from_seed(derive_seed(seed, 2, 0));
                let a = gaussian_matrix(p.m, n, 1.0 / p.m as f64, &mut rng);
                let x_star = unit_vector(p.k, &mut rng);
                let model = MeasurementModel::Linear { a };
                let y = measure(&model, &net, &x_star).map_err(|e| e.to_string())?;
                let rc = RecoveryConfig {
                    step_size: Some(p.step_scale * default_step_size(&net, model.matrix())),
                    max_iterations: p.max_iterations,
                    gradient_tolerance: 1e-9,
                    negation_check: true,
                    restarts: p.restarts,
                    init_seed: derive_seed(seed, 3, 0),
                };
                let result =
                    recover(&net, &model, &y, &rc, Some(&x_star)).map_err(|e| e.to_string())?;
                let rel = result.relative_error.unwrap_or(f64::NAN);
                Ok(vec![
                    CellValue::Float(rel),
                    CellValue::Bool(rel <= p.success_threshold),
                ])
            })();
            finish_row(row, &["relative_error", "success"], outcome)
        })
        .collect()
}

fn run_collision_demo(cfg: &ExperimentConfig, p: &CollisionDemoParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    let total = p.k_grid.len() * trials;
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let k = p.k_grid[idx / trials];
            let m = 2 * k - 1;
            let seed = derive_seed(cfg.master_seed, TAG_COLLISION_DEMO, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("collision_demo".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("k", CellValue::UInt(k as u64));
            row.push("m", CellValue::UInt(m as u64));
            let outcome = (|| {
                let mut rng = rng_from_seed(seed);
                let w = gaussian_matrix(m, k, 1.0, &mut rng);
                let (x, y) = construct_collision(&w).map_err(|e| e.to_string())?;
                // Independent oracle: evaluate the one-layer forward map
                // directly rather than through the network type.
                let gx = (&w * &x).map(|z| if z > 0.0 { z } else { 0.0 });
                let gy = (&w * &y).map(|z| if z > 0.0 { z } else { 0.0 });
                let gap = (gx - gy).amax();
                let separation = (&x - &y).norm();
                let b = (0..m).map(|i| w.row(i).norm()).fold(0.0, f64::max);
                let lower_bound = 1.0 / b;
                let verified = gap <= 1e-9 && separation >= lower_bound - 1e-9;
                Ok(vec![
                    CellValue::Float(gap),
                    CellValue::Float(separation),
                    CellValue::Float(lower_bound),
                    CellValue::Bool(verified),
                ])
            })();
            finish_row(
                row,
                &["forward_gap", "separation", "lower_bound", "collision_verified"],
                outcome,
            )
        })
        .collect()
}

fn run_net_demo(cfg: &ExperimentConfig, p: &NetDemoParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    (0..trials)
        .into_par_iter()
        .map(|idx| {
            let seed = derive_seed(cfg.master_seed, TAG_NET_DEMO, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("net_demo".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("k", CellValue::UInt(p.k as u64));
            row.push("delta", CellValue::Float(p.delta));
            row.push("epsilon", CellValue::Float(p.epsilon));
            let outcome = (|| {
                let mut rng = rng_from_seed(derive_seed(seed, 1, 0));
                let w = unit_vector(p.k, &mut rng);
                let spec = PseudoBallSpec::slab(w, p.epsilon).map_err(|e| e.to_string())?;
                let points = p.sphere_test_points.unwrap_or_else(|| default_scan_size(p.k));
                let net = build_aspherical_net(&spec, p.delta, points, derive_seed(seed, 2, 0))
                    .map_err(|e| e.to_string())?;
                let scan = net_scan_points(p.k, points);
                let mut covered = 0usize;
                for z in &scan {
                    if net.covers(&spec, z).map_err(|e| e.to_string())? {
                        covered += 1;
                    }
                }
                let fraction = covered as f64 / scan.len() as f64;
                Ok(vec![
                    CellValue::UInt(net.len() as u64),
                    CellValue::Float(net_size_bound(net.gamma, net.delta, p.k)),
                    CellValue::Float(net.gamma),
                    CellValue::Float(fraction),
                    CellValue::Bool(covered == scan.len()),
                ])
            })();
            finish_row(
                row,
                &[
                    "centers",
                    "size_bound",
                    "gamma_estimate",
                    "covered_fraction",
                    "coverage_complete",
                ],
                outcome,
            )
        })
        .collect()
}

fn run_rric_sweep(cfg: &ExperimentConfig, p: &RricSweepParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    let total = p.m_grid.len() * trials;
    let k = p.dims[0];
    let n = *p.dims.last().expect("dims validated nonempty");
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let m = p.m_grid[idx / trials];
            let seed = derive_seed(cfg.master_seed, TAG_RRIC_SWEEP, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("rric_sweep".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("m", CellValue::UInt(m as u64));
            row.push("n", CellValue::UInt(n as u64));
            row.push("k", CellValue::UInt(k as u64));
            let outcome = (|| {
                let net = sample_gaussian_network(
                    &p.dims,
                    VarianceRule::OneOverRows,
                    derive_seed(seed, 1, 0),
                )
                .map_err(|e| e.to_string())?;
                let mut rng = rng_from_seed(derive_seed(seed, 2, 0));
                let a = gaussian_matrix(m, n, 1.0 / m as f64, &mut rng);
                let report = rric_deviation(&a, &net, p.quadruples, derive_seed(seed, 3, 0))
                    .map_err(|e| e.to_string())?;
                Ok(vec![
                    CellValue::Float(report.max_ratio_deviation),
                    CellValue::UInt(report.quadruples_tested as u64),
                ])
            })();
            finish_row(row, &["max_ratio_deviation", "quadruples_tested"], outcome)
        })
        .collect()
}

fn run_landscape(cfg: &ExperimentConfig, p: &LandscapeParams) -> Vec<ReportRow> {
    let trials = cfg.trial_count;
    (0..trials)
        .into_par_iter()
        .map(|idx| {
            let seed = derive_seed(cfg.master_seed, TAG_LANDSCAPE, idx as u64);
            let mut row = ReportRow::new();
            row.push("experiment", CellValue::Text("landscape".into()));
            row.push("trial", CellValue::UInt(idx as u64));
            row.push("seed", CellValue::UInt(seed));
            row.push("m", CellValue::UInt(p.m as u64));
            let outcome = (|| {
                let net = sample_gaussian_network(
                    &p.dims,
                    VarianceRule::OneOverRows,
                    derive_seed(seed, 1, 0),
                )
                .map_err(|e| e.to_string())?;
                let n = net.output_dim();
                let k = net.latent_dim();
                let mut rng = rng_from_seed(derive_seed(seed, 2, 0));
                let a = gaussian_matrix(p.m, n, 1.0 / p.m as f64, &mut rng);
                let x_star = unit_vector(k, &mut rng);
                let model = MeasurementModel::Linear { a };
                let y = measure(&model, &net, &x_star).map_err(|e| e.to_string())?;
                let rc = RecoveryConfig {
                    step_size: Some(p.step_scale * default_step_size(&net, model.matrix())),
                    max_iterations: p.max_iterations,
                    gradient_tolerance: 1e-9,
                    negation_check: false,
                    restarts: 1,
                    init_seed: 0,
                };
                let report = landscape_scan(
                    &net,
                    &model,
                    &y,
                    ScanMode::Restarts { count: p.starts },
                    &rc,
                    Some(&x_star),
                    derive_seed(seed, 3, 0),
                )
                .map_err(|e| e.to_string())?;
                let tol = 1e-2 * x_star.norm();
                let mut aligned = 0usize;
                for cluster in &report.clusters {
                    let c = DVector::from_column_slice(&cluster.center);
                    let near_truth = (&c - &x_star).norm() <= tol;
                    let dot = c.dot(&x_star);
                    let near_mirror = dot < 0.0 && (&c - &x_star * dot).norm() <= tol;
                    if near_truth || near_mirror {
                        aligned += cluster.size;
                    }
                }
                let best_loss = report
                    .clusters
                    .first()
                    .map(|c| c.min_loss)
                    .unwrap_or(f64::NAN);
                let negative = report.negative_scaling(&x_star);
                Ok(vec![
                    CellValue::UInt(report.clusters.len() as u64),
                    CellValue::UInt(report.starts as u64),
                    CellValue::Float(best_loss),
                    CellValue::Float(aligned as f64 / report.starts as f64),
                    negative.map(CellValue::Float).unwrap_or(CellValue::Empty),
                ])
            })();
            finish_row(
                row,
                &[
                    "clusters",
                    "starts",
                    "best_loss",
                    "aligned_fraction",
                    "negative_scaling",
                ],
                outcome,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Renders rows to a CSV or JSON string. CSV gets a header row; JSON is an
/// array of flat records. Floats print in their shortest round-trip form in
/// both formats.
pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    let header = rows[0].column_names();
    for row in rows {
        if row.column_names() != header {
            return Err(schema("report rows disagree on their column set"));
        }
    }
    match format {
        ReportFormat::Csv => {
            let mut out = header.join(",");
            out.push('\n');
            for row in rows {
                let line: Vec<String> = row.columns.iter().map(|(_, v)| v.csv()).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        ReportFormat::Json => {
            let array: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut object = Map::new();
                    for (name, value) in &row.columns {
                        object.insert((*name).to_string(), value.json());
                    }
                    Value::Object(object)
                })
                .collect();
            let mut out = serde_json::to_string_pretty(&Value::Array(array))?;
            out.push('\n');
            Ok(out)
        }
    }
}

/// Renders and writes a report. The empty-rows error fires before the file
/// is created.
pub fn emit_report(
    rows: &[ReportRow],
    format: ReportFormat,
    path: &Path,
) -> Result<(), HarnessError> {
    let text = render_report(rows, format)?;
    std::fs::write(path, text)?;
    Ok(())
}
