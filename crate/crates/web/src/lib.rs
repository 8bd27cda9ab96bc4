//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each operation takes a model as text (the line format, or `gen:<spec>`)
//! and returns a JSON document.

use mixlab_core::checks::{
    check_gap_bound, lower_bound_pipeline, select_low_cov_subset, simulate_coupled, CouplingParams,
    PipelineParams,
};
use mixlab_core::dynamics::ChainSpec;
use mixlab_core::exact::{ComponentData, Limits};
use mixlab_core::experiment::{generate_model, parse_model_str, GeneratorSpec};
use mixlab_core::IsingModel;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Exact enumeration in the browser stays at or below this many sites.
pub const BROWSER_SITE_LIMIT: usize = 10;

pub fn model_from_text(text: &str, seed: u64) -> Result<IsingModel, String> {
    let t = text.trim();
    let m = match t.strip_prefix("gen:") {
        Some(spec) => GeneratorSpec::parse(spec).and_then(|g| generate_model(&g, seed)),
        None => parse_model_str(t),
    };
    m.map_err(|e| e.to_string())
}

/// Plus-start TV curve, gap and `ln 2 (1/gap - 1)` next to `t_mix^+`.
pub fn tv_curve_json(model: &str, threshold: f64) -> Result<String, String> {
    let m = model_from_text(model, 0)?;
    if m.n() > BROWSER_SITE_LIMIT {
        return Err(format!("at most {BROWSER_SITE_LIMIT} sites in the browser"));
    }
    let r = check_gap_bound(&m, threshold, &Limits::default());
    if let Some(e) = r.error {
        return Err(e);
    }
    let tv: Vec<f64> = r.series("tv_plus").map(|s| s.points.iter().map(|p| p.value).collect()).unwrap_or_default();
    Ok(json!({
        "n": m.n(),
        "tv": tv,
        "gap": r.details["gap"],
        "bound": r.details["bound"],
        "t_mix_plus": r.details["t_mix_plus"],
        "t_mix_minus": r.details["t_mix_minus"],
        "verdict": r.verdict,
    })
    .to_string())
}

/// Mean `S_t` from both extremes and the mean coupled distance on a
/// low-covariance `k`-subset.
pub fn coupled_json(model: &str, k: usize, horizon: u64, replicas: usize, seed: u64) -> Result<String, String> {
    let m = model_from_text(model, seed)?;
    let lim = Limits::default();
    let data = ComponentData::new(&m, &lim).map_err(|e| e.to_string())?;
    let (subset, _) = select_low_cov_subset(&data.covariance(), k.min(m.n()), seed).map_err(|e| e.to_string())?;
    let spec = ChainSpec::z_chain(&m, subset.clone(), &lim).map_err(|e| e.to_string())?;
    let params = CouplingParams {
        horizon,
        replicas,
        checkpoints: horizon.clamp(1, 200) as usize,
        confidence: 0.99,
    };
    let run = simulate_coupled(&spec, &params, seed).map_err(|e| e.to_string())?;
    let reps = run.plus_sums.len() as f64;
    let mean = |rows: &[Vec<i64>], c: usize| rows.iter().map(|r| r[c] as f64).sum::<f64>() / reps;
    let cols = 0..run.times.len();
    let kf = spec.k() as f64;
    Ok(json!({
        "subset": subset,
        "t": run.times,
        "plus": cols.clone().map(|c| mean(&run.plus_sums, c)).collect::<Vec<_>>(),
        "minus": cols.clone().map(|c| mean(&run.minus_sums, c)).collect::<Vec<_>>(),
        "distance": cols
            .map(|c| run.distances.iter().map(|r| f64::from(r[c])).sum::<f64>() / reps)
            .collect::<Vec<_>>(),
        "mean_bound": run.times.iter().map(|&t| kf * (1.0 - 1.0 / kf).powf(t as f64)).collect::<Vec<_>>(),
        "order_violations": run.order_violations,
    })
    .to_string())
}

/// The two-branch lower bound on `t_mix^+`.
pub fn pipeline_json(model: &str, k: Option<usize>, replicas: usize, seed: u64) -> Result<String, String> {
    let m = model_from_text(model, seed)?;
    let params = PipelineParams {
        k,
        replicas,
        pilot_replicas: (replicas / 4).max(1),
        ..PipelineParams::default()
    };
    let r = lower_bound_pipeline(&m, &params, seed, &Limits::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn tv_curve(model: &str, threshold: f64) -> Result<String, JsValue> {
    tv_curve_json(model, threshold).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn coupled_chains(model: &str, k: usize, horizon: u32, replicas: usize, seed: u32) -> Result<String, JsValue> {
    coupled_json(model, k, u64::from(horizon), replicas, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}

/// `k = 0` selects the default subset size.
#[wasm_bindgen]
pub fn pipeline(model: &str, k: usize, replicas: usize, seed: u32) -> Result<String, JsValue> {
    let k = (k > 0).then_some(k);
    pipeline_json(model, k, replicas, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
