//! Model ingestion and generation, experiment configuration, suite
//! execution, reports and plot extracts.

mod model_io;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use model_io::{generate_model, load_model, parse_model, parse_model_str, write_model, GeneratorSpec};

use crate::checks::{
    check_censoring_exhaustive, check_contraction, check_expectation_decay, check_gap_bound,
    check_ghs_concavity, check_subadditivity_all, check_variance_bound, check_variance_uniform,
    describe, lower_bound_pipeline, select_low_cov_subset, CheckReport, CouplingParams, PipelineParams,
    PipelineResult, Verdict,
};
use crate::dynamics::{derive_seed, RngStream};
use crate::error::{Error, Result};
use crate::exact::{ComponentData, Limits};
use crate::spin::IsingModel;

/// Checker ids in report order.
pub const CHECKERS: [&str; 10] = [
    "censoring",
    "contraction",
    "covariance_subset",
    "expectation_decay",
    "gap_bound",
    "ghs_concavity",
    "pipeline",
    "subadditivity",
    "variance_bound",
    "variance_uniform",
];

pub const REPORT_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteParams {
    pub k: Option<usize>,
    /// Coupling horizon; defaults to `⌈2k ln k + 4k⌉`.
    pub horizon: Option<u64>,
    pub replicas: usize,
    pub checkpoints: usize,
    pub confidence: f64,
    pub tv_threshold: f64,
    pub enum_limit: usize,
    pub block_limit: usize,
    pub ghs_step: f64,
    /// Per-site field values whose product forms the GHS grid.
    pub ghs_levels: Vec<f64>,
    pub subadditivity_targets: usize,
    pub field_pairs: usize,
    pub censoring_length: usize,
    pub pipeline: PipelineParams,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            k: None,
            horizon: None,
            replicas: 1000,
            checkpoints: 20,
            confidence: 0.99,
            tv_threshold: 0.25,
            enum_limit: crate::exact::DEFAULT_ENUMERATION_LIMIT,
            block_limit: crate::exact::DEFAULT_BLOCK_LIMIT,
            ghs_step: 1e-3,
            ghs_levels: vec![0.0, 0.5, 1.0],
            subadditivity_targets: 3,
            field_pairs: 8,
            censoring_length: 4,
            pipeline: PipelineParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// File path or `gen:<spec>`.
    pub model: String,
    /// Checker ids, or `["all"]`.
    pub suite: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub params: SuiteParams,
}

impl ExperimentConfig {
    pub fn new(model: &str, suite: &[&str], seed: u64) -> Self {
        Self {
            model: model.to_string(),
            suite: suite.iter().map(|s| s.to_string()).collect(),
            seed,
            output: None,
            params: SuiteParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    /// Requested ids, validated and in report order.
    pub fn checkers(&self) -> Result<Vec<&'static str>> {
        let mut out = Vec::new();
        for id in &self.suite {
            if id == "all" {
                return Ok(CHECKERS.to_vec());
            }
            let known = CHECKERS
                .iter()
                .find(|c| **c == id.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("unknown checker '{id}'")))?;
            out.push(*known);
        }
        if out.is_empty() {
            return Err(Error::InvalidInput("the suite is empty".into()));
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn limits(&self) -> Result<Limits> {
        Limits::default()
            .set_enumeration(self.params.enum_limit)?
            .set_block(self.params.block_limit)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub indeterminate: usize,
    pub error: usize,
}

/// Deterministic work counters standing in for wall-clock time, so reports
/// stay byte-identical across machines.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    /// Enumerated states or simulated steps per checker.
    pub work: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: u32,
    pub version: String,
    pub config: ExperimentConfig,
    pub instance: String,
    pub checks: Vec<CheckReport>,
    pub pipeline: Option<PipelineResult>,
    pub summary: Summary,
    pub timing: Timing,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("report: {e}")))
    }

    /// 0 when nothing failed, 1 on any failure, 2 when a check could not
    /// run on this input.
    pub fn exit_code(&self) -> i32 {
        if self.summary.fail > 0 {
            1
        } else if self.summary.error > 0 {
            2
        } else {
            0
        }
    }

    pub fn check(&self, id: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.statement == id)
    }
}

fn default_k(n: usize) -> usize {
    let nf = n as f64;
    let k = if n < 2 { 1 } else { (nf.sqrt() / nf.ln()).floor() as usize };
    k.clamp(2.min(n), n)
}

/// The `|F|`-subset used by the coupling checkers: low covariance sum, with
/// covariances from enumeration.
fn coupling_subset(model: &IsingModel, k: usize, seed: u64, limits: &Limits) -> Result<Vec<usize>> {
    let data = ComponentData::new(model, limits)?;
    Ok(select_low_cov_subset(&data.covariance(), k, seed)?.0)
}

fn ghs_grid(n: usize, levels: &[f64], seed: u64) -> Vec<Vec<f64>> {
    let full = (levels.len() as f64).powi(n as i32);
    if full <= 729.0 {
        let mut grid = vec![Vec::new()];
        for _ in 0..n {
            grid = grid
                .into_iter()
                .flat_map(|g| {
                    levels.iter().map(move |&h| {
                        let mut x = g.clone();
                        x.push(h);
                        x
                    })
                })
                .collect();
        }
        grid
    } else {
        use rand::Rng;
        let mut rng = RngStream::new(seed, 0);
        (0..64)
            .map(|_| {
                (0..n)
                    .map(|_| levels[rng.rng().random_range(0..levels.len())])
                    .collect()
            })
            .collect()
    }
}

fn run_checker(id: &str, model: &IsingModel, config: &ExperimentConfig, limits: &Limits) -> (CheckReport, u64) {
    let p = &config.params;
    let seed = derive_seed(config.seed, id);
    let n = model.n();
    let states = 1u64 << n.min(63);
    let coupling = |f: fn(&IsingModel, &[usize], &CouplingParams, u64, &Limits) -> CheckReport,
                    claim: &str|
     -> (CheckReport, u64) {
        let k = p.k.unwrap_or_else(|| default_k(n)).min(n);
        let kf = k as f64;
        let horizon = p
            .horizon
            .unwrap_or_else(|| (2.0 * kf * kf.max(1.0).ln() + 4.0 * kf).ceil() as u64);
        let params = CouplingParams {
            horizon,
            replicas: p.replicas,
            checkpoints: p.checkpoints,
            confidence: p.confidence,
        };
        match coupling_subset(model, k, derive_seed(seed, "subset"), limits) {
            Ok(f_set) => (f(model, &f_set, &params, seed, limits), horizon * p.replicas as u64),
            Err(e) => (CheckReport::new(id, claim, describe(model)).failed_to_run(&e), 0),
        }
    };
    match id {
        "gap_bound" => (check_gap_bound(model, p.tv_threshold, limits), states),
        "variance_bound" => (check_variance_bound(model, limits), states),
        "covariance_subset" => {
            let k = p.k.unwrap_or_else(|| default_k(n)).min(n);
            let r = ComponentData::new(model, limits)
                .and_then(|d| select_low_cov_subset(&d.covariance(), k, seed))
                .map(|(_, r)| r);
            match r {
                Ok(r) => (r, states),
                Err(e) => (
                    CheckReport::new(id, "sum_{u!=v in F} C_uv <= (k^2/n^2) sum_{i!=j} C_ij", describe(model))
                        .failed_to_run(&e),
                    0,
                ),
            }
        }
        "ghs_concavity" => {
            let grid = ghs_grid(n, &p.ghs_levels, derive_seed(seed, "grid"));
            let work = grid.len() as u64 * states;
            let mut r = check_ghs_concavity(model, &grid, p.ghs_step, limits);
            r.seed = Some(seed);
            (r, work)
        }
        "subadditivity" => {
            if model.has_field() {
                let mut r = CheckReport::new(
                    id,
                    "E[s_u | s_vi = 1 all i] <= sum_i E[s_u | s_vi = 1]",
                    describe(model),
                );
                r.detail("not_applicable", "the statement concerns zero-field models");
                (r, 0)
            } else {
                (
                    check_subadditivity_all(model, p.subadditivity_targets, p.field_pairs, seed, limits),
                    states,
                )
            }
        }
        "censoring" => (check_censoring_exhaustive(model, p.censoring_length, limits), states),
        "contraction" => coupling(check_contraction, "E sum_F |z_t - z~_t| <= (1 - 1/(2|F|))^t * 2|F|"),
        "variance_uniform" => coupling(check_variance_uniform, "Var_z(S_t) <= 16|F|"),
        "expectation_decay" => coupling(check_expectation_decay, "E_+ S_t >= |F| (1 - 1/|F|)^t"),
        other => unreachable!("unvalidated checker {other}"),
    }
}

/// Runs the selected checkers (and the pipeline when selected). Per-check
/// problems are recorded in the report; only an unusable config or model
/// is an error.
pub fn run_suite(config: &ExperimentConfig) -> Result<Report> {
    let ids = config.checkers()?;
    let limits = config.limits()?;
    let model = load_model(&config.model, derive_seed(config.seed, "model"))?;
    let mut checks = Vec::new();
    let mut pipeline = None;
    let mut timing = Timing::default();
    let mut summary = Summary::default();
    for id in ids {
        if id == "pipeline" {
            let mut params = config.params.pipeline.clone();
            if params.k.is_none() {
                params.k = config.params.k;
            }
            let seed = derive_seed(config.seed, id);
            match lower_bound_pipeline(&model, &params, seed, &limits) {
                Ok(r) => {
                    timing.work.insert(id.into(), r.steps_simulated);
                    pipeline = Some(r);
                }
                Err(e) => {
                    let r = CheckReport::new(id, "t_mix^+ lower bound", describe(&model)).failed_to_run(&e);
                    summary.error += 1;
                    checks.push(r);
                }
            }
            continue;
        }
        let (r, work) = run_checker(id, &model, config, &limits);
        timing.work.insert(id.into(), work);
        match r.verdict {
            Verdict::Pass => summary.pass += 1,
            Verdict::Fail => summary.fail += 1,
            Verdict::Indeterminate => summary.indeterminate += 1,
            Verdict::Error => summary.error += 1,
        }
        checks.push(r);
    }
    Ok(Report {
        format: REPORT_FORMAT,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        instance: describe(&model),
        checks,
        pipeline,
        summary,
        timing,
    })
}

/// Rows `(t, value, ci)` of a series named `<checker>/<series>`, or by bare
/// series name when unambiguous. The pipeline exposes `pipeline/tv_lower`.
pub fn series_rows(report: &Report, id: &str) -> Result<Vec<(u64, f64, f64)>> {
    let (owner, name) = match id.split_once('/') {
        Some((a, b)) => (Some(a), b),
        None => (None, id),
    };
    let mut found: Vec<Vec<(u64, f64, f64)>> = Vec::new();
    if owner.is_none_or(|o| o == "pipeline") && name == "tv_lower" {
        if let Some(p) = &report.pipeline {
            found.push(p.horizons.iter().map(|h| (h.t, h.bound.estimate, h.bound.radius)).collect());
        }
    }
    for c in &report.checks {
        if owner.is_some_and(|o| o != c.statement) {
            continue;
        }
        for s in &c.series {
            if s.id == name {
                found.push(s.points.iter().map(|p| (p.t, p.value, p.ci)).collect());
            }
        }
    }
    match found.len() {
        0 => Err(Error::InvalidInput(format!("no series '{id}' in the report"))),
        1 => {
            let rows = found.pop().expect("one");
            if rows.is_empty() {
                Err(Error::InvalidInput(format!("series '{id}' is empty")))
            } else {
                Ok(rows)
            }
        }
        _ => Err(Error::InvalidInput(format!(
            "series '{id}' is ambiguous; qualify it as <checker>/{name}"
        ))),
    }
}

/// CSV with header `t,value,ci`.
pub fn emit_plot_data(report: &Report, id: &str) -> Result<String> {
    let rows = series_rows(report, id)?;
    let mut s = String::from("t,value,ci\n");
    for (t, v, ci) in rows {
        let _ = writeln!(s, "{t},{v},{ci}");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_check_on_one_site() {
        let cfg = ExperimentConfig::new("gen:empty:n=1", &["gap_bound"], 1);
        let r = run_suite(&cfg).unwrap();
        assert_eq!(r.checks.len(), 1);
        assert_eq!(r.checks[0].verdict, Verdict::Pass);
        assert_eq!(r.exit_code(), 0);
        assert_eq!(emit_plot_data(&r, "tv_plus").unwrap(), "t,value,ci\n0,0.5,0\n1,0,0\n");
        assert!(emit_plot_data(&r, "nothing").is_err());
    }

    #[test]
    fn unknown_checker_is_rejected() {
        let cfg = ExperimentConfig::new("gen:empty:n=2", &["gap_bound", "bogus"], 1);
        assert!(run_suite(&cfg).is_err());
    }

    #[test]
    fn capacity_is_reported_per_check() {
        let mut cfg = ExperimentConfig::new("gen:path:n=14,j=0.1", &["gap_bound", "variance_bound"], 1);
        cfg.params.enum_limit = 12;
        let r = run_suite(&cfg).unwrap();
        assert!(r.checks.iter().all(|c| c.verdict == Verdict::Error && c.error.is_some()));
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::new("gen:cycle:n=4", &["all"], 5);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let minimal = ExperimentConfig::from_json(r#"{"model":"gen:empty:n=3","suite":["all"],"seed":2}"#).unwrap();
        assert_eq!(minimal.params, SuiteParams::default());
    }
}
