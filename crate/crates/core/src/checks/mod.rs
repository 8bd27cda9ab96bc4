//! One checker per inequality, each producing a [`CheckReport`], and the
//! end-to-end lower-bound pipeline.

mod coupling;
mod exact;
mod pipeline;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::spin::IsingModel;

pub use coupling::{
    check_contraction, check_expectation_decay, check_variance_uniform, simulate_coupled,
    CoupledRun, CouplingParams,
};
pub use exact::{
    check_censoring, check_censoring_exhaustive, check_gap_bound, check_ghs_concavity,
    check_subadditivity, check_subadditivity_all, check_variance_bound, select_low_cov_subset,
    GHS_TOLERANCE,
};
pub use pipeline::{
    lower_bound_pipeline, Branch, GapEstimate, HorizonResult, Outcome, PipelineParams,
    PipelineResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Numerical noise or a confidence interval straddles the bound, or the
    /// statement's hypothesis does not hold on the instance.
    Indeterminate,
    /// The check could not run (capacity or invalid input).
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// Margins come from enumeration; no sampling error.
    Exact,
    MonteCarlo { confidence: f64, samples: u64 },
    /// Sampled or approximated inputs without a confidence guarantee.
    Approximate { reason: String },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: u64,
    pub value: f64,
    /// Confidence radius at the report's confidence level (0 when exact).
    pub ci: f64,
    /// Standard error of `value` (0 when exact).
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: String,
    pub points: Vec<SeriesPoint>,
}

impl Series {
    pub fn exact(id: &str, points: impl IntoIterator<Item = (u64, f64)>) -> Self {
        Self {
            id: id.to_string(),
            points: points
                .into_iter()
                .map(|(t, value)| SeriesPoint {
                    t,
                    value,
                    ci: 0.0,
                    se: 0.0,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// Checker id, e.g. `gap_bound`.
    pub statement: String,
    /// The inequality being checked.
    pub claim: String,
    pub instance: String,
    pub verdict: Verdict,
    /// Distance inside the inequality; negative means violated.
    pub margin: Option<f64>,
    pub certificate: Certificate,
    pub seed: Option<u64>,
    pub details: BTreeMap<String, serde_json::Value>,
    pub series: Vec<Series>,
    pub error: Option<String>,
}

impl CheckReport {
    pub fn new(statement: &str, claim: &str, instance: String) -> Self {
        Self {
            statement: statement.to_string(),
            claim: claim.to_string(),
            instance,
            verdict: Verdict::Indeterminate,
            margin: None,
            certificate: Certificate::None,
            seed: None,
            details: BTreeMap::new(),
            series: Vec::new(),
            error: None,
        }
    }

    pub fn failed_to_run(mut self, err: &Error) -> Self {
        self.verdict = Verdict::Error;
        self.error = Some(err.to_string());
        self
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.details.insert(key.to_string(), v);
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn series(&self, id: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.id == id)
    }
}

/// Short description of a model for report headers.
pub fn describe(model: &IsingModel) -> String {
    let jmax = model.edges().iter().map(|e| e.j).fold(0.0, f64::max);
    let field = if model.has_field() { "nonzero" } else { "zero" };
    format!(
        "n={} edges={} max_J={} field={}",
        model.n(),
        model.edges().len(),
        jmax,
        field
    )
}
