use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::exact::select_low_cov_subset;
use super::Certificate;
use crate::dynamics::{
    accelerated_step, derive_seed, glauber_step, statistic_tv_lower_bound, z_chain_step, BlockMode,
    ChainSpec, RngStream, StationaryLaw, TvLowerBound, Variant,
};
use crate::error::{Error, Result};
use crate::exact::table::covariance_sum;
use crate::exact::{ComponentData, Limits};
use crate::par::map_indexed;
use crate::spin::{plus_probability, IsingModel, SpinConfig};

/// Largest component whose gap is computed by dense eigendecomposition.
const EXACT_GAP_MAX_COMPONENT: usize = 10;

/// Independent long runs used for stationary sampling.
const STATIONARY_CHAINS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// `|F|`; defaults to `⌊√n / ln n⌋`.
    pub k: Option<usize>,
    pub replicas: usize,
    /// Separate runs that place the statistic threshold.
    pub pilot_replicas: usize,
    pub confidence: f64,
    pub tv_threshold: f64,
    /// `c₁` in `T₀ = ½k ln k - c₁k` and `T = (n/k)(½k ln k - 2c₁k)`.
    pub c1: f64,
    /// Explicit horizons; otherwise `scan_fractions` of `n ln n` plus `T`.
    pub horizons: Option<Vec<u64>>,
    pub scan_fractions: Vec<f64>,
    /// Fixed `r` for the event `S > r`; otherwise the midpoint of the pilot
    /// mean and the stationary mean.
    pub statistic_threshold: Option<f64>,
    /// Used when the stationary law cannot be enumerated.
    pub stationary_samples: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            k: None,
            replicas: 1000,
            pilot_replicas: 250,
            confidence: 0.99,
            tv_threshold: 0.25,
            c1: 1.0,
            horizons: None,
            scan_fractions: (1..=10).map(|i| i as f64 * 0.05).collect(),
            statistic_threshold: None,
            stationary_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Gap,
    Statistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Certified,
    Inconclusive,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// A lower bound on `1/gap`: the larger of the exact value (when
    /// resolvable) and `Var(S) / E(S)`.
    pub inverse_gap_lower: f64,
    pub exact_inverse_gap: Option<f64>,
    pub variance: f64,
    pub dirichlet_form: f64,
    /// Estimated from stationary samples rather than enumeration.
    pub sampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub t: u64,
    /// `E N_T = T k / n` for the projected chain.
    pub mean_f_updates: f64,
    pub pilot_mean: f64,
    pub bound: TvLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub branch: Branch,
    pub outcome: Outcome,
    pub n: usize,
    pub n_log_n: f64,
    pub k: usize,
    pub subset: Vec<usize>,
    pub covariance_sum: Option<f64>,
    /// `(k²/n²) Σ_{i≠j} C_ij`.
    pub covariance_bound: Option<f64>,
    pub covariance_sampled: bool,
    pub gap: Option<GapEstimate>,
    /// `t_mix^+ >= lower_bound`.
    pub lower_bound: f64,
    /// Statistic branch: `t_mix^+ > certified_horizon`.
    pub certified_horizon: Option<u64>,
    pub confidence: Option<f64>,
    pub certificate: Certificate,
    pub tv_threshold: f64,
    pub c1: f64,
    pub t_formula: Option<f64>,
    pub t0_formula: Option<f64>,
    pub chain: Option<String>,
    pub stationary_exact: bool,
    pub horizons: Vec<HorizonResult>,
    pub seed: u64,
    pub steps_simulated: u64,
    pub notes: Vec<String>,
}

impl PipelineResult {
    fn new(n: usize, params: &PipelineParams, seed: u64) -> Self {
        Self {
            branch: Branch::Statistic,
            outcome: Outcome::Inconclusive,
            n,
            n_log_n: n as f64 * (n as f64).ln(),
            k: 0,
            subset: Vec::new(),
            covariance_sum: None,
            covariance_bound: None,
            covariance_sampled: false,
            gap: None,
            lower_bound: 0.0,
            certified_horizon: None,
            confidence: None,
            certificate: Certificate::None,
            tv_threshold: params.tv_threshold,
            c1: params.c1,
            t_formula: None,
            t0_formula: None,
            chain: None,
            stationary_exact: false,
            horizons: Vec::new(),
            seed,
            steps_simulated: 0,
            notes: Vec::new(),
        }
    }
}

fn validate(params: &PipelineParams) -> Result<()> {
    if !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence {} outside (0, 1)",
            params.confidence
        )));
    }
    if !(params.tv_threshold > 0.0 && params.tv_threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "TV threshold {} outside (0, 1)",
            params.tv_threshold
        )));
    }
    if params.replicas == 0 || params.pilot_replicas == 0 || params.stationary_samples < 2 {
        return Err(Error::InvalidInput("replica and sample counts must be positive".into()));
    }
    Ok(())
}

/// Thinned states from independent long Glauber runs (burn-in `10 n ln n`,
/// thinning `n`), alternately started at all-plus and all-minus.
fn sample_stationary(model: &IsingModel, samples: usize, seed: u64) -> (Vec<SpinConfig>, u64) {
    let n = model.n();
    let burn = (10.0 * n as f64 * (n as f64).ln()).ceil() as u64;
    let per_chain = samples.div_ceil(STATIONARY_CHAINS);
    let runs = map_indexed(STATIONARY_CHAINS, |c| {
        let mut src = RngStream::new(seed, c as u64);
        let mut x = if c % 2 == 0 {
            SpinConfig::all_plus(n)
        } else {
            SpinConfig::all_minus(n)
        };
        for _ in 0..burn {
            glauber_step(model, &mut x, &mut src);
        }
        let mut out = Vec::with_capacity(per_chain);
        for _ in 0..per_chain {
            for _ in 0..n {
                glauber_step(model, &mut x, &mut src);
            }
            out.push(x.clone());
        }
        out
    });
    let steps = STATIONARY_CHAINS as u64 * (burn + (per_chain * n) as u64);
    let mut all: Vec<SpinConfig> = runs.into_iter().flatten().collect();
    all.truncate(samples);
    (all, steps)
}

fn sampled_gap(model: &IsingModel, xs: &[SpinConfig]) -> GapEstimate {
    let n = model.n() as f64;
    let m = xs.len() as f64;
    let sums: Vec<f64> = xs.iter().map(|x| x.sum() as f64).collect();
    let mean = sums.iter().sum::<f64>() / m;
    let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let mut flips = 0.0;
    for x in xs {
        for v in 0..model.n() {
            let s = f64::from(x.get(v));
            flips += plus_probability(-s * model.local_field(x, v));
        }
    }
    let e = 2.0 * flips / (n * m);
    GapEstimate {
        inverse_gap_lower: var / e,
        exact_inverse_gap: None,
        variance: var,
        dirichlet_form: e,
        sampled: true,
    }
}

fn exact_gap(data: &ComponentData, limits: &Limits) -> Result<GapEstimate> {
    let var = data.sum_variance();
    let e = data.sum_dirichlet_form();
    let variational = var / e;
    let mut exact = None;
    if data.largest_component() <= EXACT_GAP_MAX_COMPONENT {
        let g = data.gap(limits)?;
        // below this the f64 eigenvalue has no correct digits left
        if g > 1e-9 {
            exact = Some(1.0 / g);
        }
    }
    let lower = match exact {
        Some(inv) => variational.max(inv * (1.0 - 1e-9)),
        None => variational,
    };
    Ok(GapEstimate {
        inverse_gap_lower: lower,
        exact_inverse_gap: exact,
        variance: var,
        dirichlet_form: e,
        sampled: false,
    })
}

fn sampled_covariance(n: usize, xs: &[SpinConfig]) -> (Vec<Vec<f64>>, usize) {
    let m = xs.len() as f64;
    let mut mean = vec![0.0; n];
    let mut second = vec![vec![0.0; n]; n];
    for x in xs {
        let s = x.spins();
        for u in 0..n {
            mean[u] += f64::from(s[u]);
            for v in u..n {
                second[u][v] += f64::from(s[u] * s[v]);
            }
        }
    }
    for mu in &mut mean {
        *mu /= m;
    }
    let mut clamped = 0;
    let mut cov = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in u..n {
            let mut c = second[u][v] / m - mean[u] * mean[v];
            if c < 0.0 {
                clamped += usize::from(u != v);
                c = 0.0;
            }
            cov[u][v] = c;
            cov[v][u] = c;
        }
    }
    (cov, clamped)
}

fn default_k(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    let nf = n as f64;
    (nf.sqrt() / nf.ln()).floor() as usize
}

fn horizons(params: &PipelineParams, n: usize, t_formula: f64) -> Vec<u64> {
    let mut hs: Vec<u64> = match &params.horizons {
        Some(h) => h.clone(),
        None => {
            let nln = n as f64 * (n as f64).ln();
            let mut h: Vec<u64> = params
                .scan_fractions
                .iter()
                .map(|f| (f * nln).round() as u64)
                .collect();
            if t_formula >= 1.0 {
                h.push(t_formula.floor() as u64);
            }
            h
        }
    };
    hs.retain(|&t| t > 0);
    hs.sort_unstable();
    hs.dedup();
    hs
}

/// Statistic at each horizon for one run from all-plus.
fn sample_run(spec: &ChainSpec, hs: &[u64], seed: u64, stream: u64) -> (Vec<i64>, u64) {
    let mut src = RngStream::new(seed, stream);
    let n = spec.model().n();
    let mut out = Vec::with_capacity(hs.len());
    let mut steps = 0u64;
    match spec.variant() {
        Variant::ZChain => {
            // Y_T = Z_{N_T}, N_T ~ Binomial(T, k/n), built up across horizons
            let p = spec.k() as f64 / n as f64;
            let mut z = SpinConfig::all_plus(spec.k());
            let (mut prev_t, mut done) = (0u64, 0u64);
            for &t in hs {
                let more = Binomial::new(t - prev_t, p)
                    .expect("valid binomial")
                    .sample(src.rng());
                prev_t = t;
                for _ in 0..more {
                    z_chain_step(spec, &mut z, &mut src);
                }
                done += more;
                out.push(z.sum());
            }
            steps = done;
        }
        _ => {
            let mut x = SpinConfig::all_plus(n);
            let mut t = 0u64;
            for &h in hs {
                while t < h {
                    accelerated_step(spec, &mut x, &mut src);
                    t += 1;
                }
                out.push(spec.subset_sum(&x));
            }
            steps += t;
        }
    }
    (out, steps)
}

/// Two-branch certificate for `t_mix^+`: via the spectral gap when
/// `1/gap >= n ln n`, else via the distinguishing statistic on a
/// low-covariance subset run through the projected chain.
pub fn lower_bound_pipeline(
    model: &IsingModel,
    params: &PipelineParams,
    seed: u64,
    limits: &Limits,
) -> Result<PipelineResult> {
    validate(params)?;
    let n = model.n();
    if n == 0 {
        return Err(Error::InvalidInput("the model has no sites".into()));
    }
    let mut res = PipelineResult::new(n, params, seed);
    if n == 1 {
        res.outcome = Outcome::Degenerate;
        res.certificate = Certificate::Exact;
        res.notes.push("a single site: t_mix^+ >= 0 holds trivially".into());
        return Ok(res);
    }

    let data = ComponentData::new(model, limits);
    let mut samples: Option<Vec<SpinConfig>> = None;
    let gap = match &data {
        Ok(d) => exact_gap(d, limits)?,
        Err(Error::Capacity { .. }) => {
            let (xs, steps) = sample_stationary(model, params.stationary_samples, derive_seed(seed, "stationary"));
            res.steps_simulated += steps;
            let g = sampled_gap(model, &xs);
            samples = Some(xs);
            g
        }
        Err(e) => return Err(e.clone()),
    };
    let inv = gap.inverse_gap_lower;
    let sampled_gap = gap.sampled;
    res.gap = Some(gap);
    if inv >= res.n_log_n {
        res.branch = Branch::Gap;
        res.outcome = Outcome::Certified;
        res.lower_bound = std::f64::consts::LN_2 * (inv - 1.0);
        res.certificate = if sampled_gap {
            Certificate::Approximate {
                reason: "Var(S)/E(S) estimated from stationary samples".into(),
            }
        } else {
            Certificate::Exact
        };
        return Ok(res);
    }

    let k = params.k.unwrap_or_else(|| default_k(n));
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds n = {n}")));
    }
    res.k = k;
    if k < 2 {
        res.outcome = Outcome::Degenerate;
        res.certificate = Certificate::Exact;
        res.notes.push(format!("|F| = {k} is too small for the statistic test"));
        return Ok(res);
    }
    let kf = k as f64;
    let t0 = 0.5 * kf * kf.ln() - params.c1 * kf;
    let t_formula = n as f64 / kf * (0.5 * kf * kf.ln() - 2.0 * params.c1 * kf);
    res.t0_formula = Some(t0);
    res.t_formula = Some(t_formula);

    let cov = match &data {
        Ok(d) => d.covariance(),
        Err(_) => {
            let xs = samples.as_ref().expect("sampled above");
            let (c, clamped) = sampled_covariance(n, xs);
            res.covariance_sampled = true;
            res.notes.push(format!(
                "covariances estimated from {} stationary samples; {clamped} negative entries set to 0",
                xs.len()
            ));
            c
        }
    };
    let (subset, sel) = select_low_cov_subset(&cov, k, derive_seed(seed, "subset"))?;
    res.covariance_sum = Some(covariance_sum(&cov, &subset));
    res.covariance_bound = sel.details.get("bound").and_then(|v| v.as_f64());
    res.subset = subset.clone();

    let (exact_law, star): (Option<Vec<f64>>, Option<Vec<i64>>) = match &data {
        Ok(d) => (Some(d.subset_sum_law(&subset)?), None),
        Err(_) => {
            let xs = samples.as_ref().expect("sampled above");
            let s = xs
                .iter()
                .map(|x| subset.iter().map(|&v| i64::from(x.get(v))).sum())
                .collect();
            (None, Some(s))
        }
    };
    res.stationary_exact = exact_law.is_some();
    let star_mean = match (&exact_law, &star) {
        (Some(law), _) => law.iter().enumerate().map(|(j, p)| p * (2.0 * j as f64 - kf)).sum(),
        (_, Some(s)) => s.iter().sum::<i64>() as f64 / s.len() as f64,
        _ => unreachable!(),
    };

    let spec = match ChainSpec::z_chain(model, subset.clone(), limits) {
        Ok(s) => s,
        Err(Error::Capacity { .. }) => {
            res.notes.push("a block is too large to enumerate; the accelerated chain runs instead".into());
            ChainSpec::accelerated(model, subset.clone(), limits)?
        }
        Err(e) => return Err(e),
    };
    let nested = !matches!(spec.mode(), BlockMode::Exact);
    res.chain = Some(
        match (spec.variant(), nested) {
            (Variant::ZChain, _) => "projected",
            (_, false) => "accelerated_exact",
            (_, true) => "accelerated_nested",
        }
        .to_string(),
    );

    let hs = horizons(params, n, t_formula);
    if hs.is_empty() {
        res.notes.push("no positive horizon to test".into());
        return Ok(res);
    }
    let main_seed = derive_seed(seed, "replicas");
    let pilot_seed = derive_seed(seed, "pilot");
    let pilot = map_indexed(params.pilot_replicas, |r| sample_run(&spec, &hs, pilot_seed, r as u64));
    let main = map_indexed(params.replicas, |r| sample_run(&spec, &hs, main_seed, r as u64));
    res.steps_simulated += pilot.iter().chain(&main).map(|p| p.1).sum::<u64>();

    let each = 1.0 - (1.0 - params.confidence) / hs.len() as f64;
    for (h, &t) in hs.iter().enumerate() {
        let pilot_mean = pilot.iter().map(|p| p.0[h] as f64).sum::<f64>() / pilot.len() as f64;
        let r = params
            .statistic_threshold
            .unwrap_or(0.5 * (pilot_mean + star_mean));
        let plus: Vec<i64> = main.iter().map(|m| m.0[h]).collect();
        let law = match (&exact_law, &star) {
            (Some(l), _) => StationaryLaw::Exact(l),
            (_, Some(s)) => StationaryLaw::Samples(s),
            _ => unreachable!(),
        };
        let bound = statistic_tv_lower_bound(&plus, law, r, each)?;
        res.horizons.push(HorizonResult {
            t,
            mean_f_updates: t as f64 * kf / n as f64,
            pilot_mean,
            bound,
        });
    }
    res.certified_horizon = res
        .horizons
        .iter()
        .filter(|h| h.bound.lower > params.tv_threshold)
        .map(|h| h.t)
        .max();
    res.confidence = Some(params.confidence);
    let mut approx = Vec::new();
    if !res.stationary_exact {
        approx.push("stationary law of the statistic sampled from correlated long runs");
    }
    if nested {
        approx.push("blocks resampled by nested single-site sweeps");
    }
    res.certificate = if approx.is_empty() {
        Certificate::MonteCarlo {
            confidence: params.confidence,
            samples: params.replicas as u64,
        }
    } else {
        Certificate::Approximate {
            reason: approx.join("; "),
        }
    };
    match res.certified_horizon {
        Some(t) => {
            res.outcome = Outcome::Certified;
            res.lower_bound = (t + 1) as f64;
        }
        None => res.outcome = Outcome::Inconclusive,
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Edge;

    #[test]
    fn single_site_is_degenerate() {
        let r = lower_bound_pipeline(&IsingModel::empty(1).unwrap(), &PipelineParams::default(), 1, &Limits::default())
            .unwrap();
        assert_eq!((r.branch, r.outcome), (Branch::Statistic, Outcome::Degenerate));
        assert_eq!(r.lower_bound, 0.0);
    }

    #[test]
    fn mean_field_low_temperature_takes_gap_branch() {
        let n = 8;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push(Edge { u, v, j: 2.0 / n as f64 * 4.0 });
            }
        }
        let m = IsingModel::new(n, edges).unwrap();
        let r = lower_bound_pipeline(&m, &PipelineParams::default(), 1, &Limits::default()).unwrap();
        assert_eq!(r.branch, Branch::Gap);
        assert_eq!(r.outcome, Outcome::Certified);
        assert!(r.lower_bound > r.n_log_n * 0.5);
    }

    #[test]
    fn independent_spins_certify() {
        let m = IsingModel::empty(64).unwrap();
        let params = PipelineParams {
            k: Some(64),
            replicas: 400,
            pilot_replicas: 100,
            ..PipelineParams::default()
        };
        let r = lower_bound_pipeline(&m, &params, 3, &Limits::default()).unwrap();
        assert_eq!(r.branch, Branch::Statistic);
        assert_eq!(r.outcome, Outcome::Certified);
        assert!(r.certified_horizon.unwrap() as f64 >= 0.15 * r.n_log_n);
        assert_eq!(r, lower_bound_pipeline(&m, &params, 3, &Limits::default()).unwrap());
    }

    #[test]
    fn default_k_small_n() {
        assert_eq!(default_k(10), 1);
        assert_eq!(default_k(256), 2);
        assert_eq!(default_k(10_000), 10);
    }
}
