use serde::{Deserialize, Serialize};

use super::{describe, CheckReport, Certificate, Series, SeriesPoint, Verdict};
use crate::dynamics::{hoeffding_radius, monotone_coupled_z_step, z_chain_step, ChainSpec, OccupancyLaw, RngStream, Variant};
use crate::error::{Error, Result};
use crate::exact::table::covariance_sum;
use crate::exact::{ComponentData, Limits};
use crate::par::map_indexed;
use crate::spin::{IsingModel, SpinConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub horizon: u64,
    pub replicas: usize,
    /// Number of equal intervals between recorded times.
    pub checkpoints: usize,
    pub confidence: f64,
}

impl CouplingParams {
    pub fn new(horizon: u64, replicas: usize) -> Self {
        Self {
            horizon,
            replicas,
            checkpoints: 20,
            confidence: 0.99,
        }
    }

    pub fn times(&self) -> Vec<u64> {
        let c = self.checkpoints.max(1) as u64;
        let mut t: Vec<u64> = (0..=c).map(|i| (i * self.horizon + c / 2) / c).collect();
        t.dedup();
        t
    }

    fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::InvalidInput("at least two replicas are needed".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput(format!(
                "confidence {} outside (0, 1)",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Monotone-coupled `F`-chains from all-plus and all-minus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub k: usize,
    pub times: Vec<u64>,
    /// `[replica][checkpoint]`.
    pub plus_sums: Vec<Vec<i64>>,
    pub minus_sums: Vec<Vec<i64>>,
    /// `Σ_{v∈F} |z_t(v) - z̃_t(v)|`.
    pub distances: Vec<Vec<u32>>,
    /// Per replica, `Σ_{t<T} D_{t+1}` and `Σ_{t<T} D_t`.
    pub next_distance_total: Vec<u64>,
    pub distance_total: Vec<u64>,
    /// Steps after which `z >= z̃` failed somewhere.
    pub order_violations: u64,
    pub coupled_steps: u64,
    pub uncoalesced_steps: u64,
}

struct Replica {
    plus: Vec<i64>,
    minus: Vec<i64>,
    dist: Vec<u32>,
    next_total: u64,
    total: u64,
    violations: u64,
    uncoalesced: u64,
}

fn run_replica(spec: &ChainSpec, times: &[u64], seed: u64, r: usize) -> Replica {
    let k = spec.k();
    let mut src = RngStream::new(seed, r as u64);
    let mut z = SpinConfig::all_plus(k);
    let mut zt = SpinConfig::all_minus(k);
    // previous spins, to read off the single changed coordinate
    let mut prev = vec![1i8; k];
    let mut prev_t = vec![-1i8; k];
    let (mut sp, mut sm) = (k as i64, -(k as i64));
    let mut diff = k as u64;
    let mut inversions = 0u64;
    let mut out = Replica {
        plus: Vec::with_capacity(times.len()),
        minus: Vec::with_capacity(times.len()),
        dist: Vec::with_capacity(times.len()),
        next_total: 0,
        total: 0,
        violations: 0,
        uncoalesced: 0,
    };
    let mut next = 0;
    let horizon = *times.last().unwrap_or(&0);
    for t in 0..=horizon {
        if t > 0 {
            let before = 2 * diff;
            if diff > 0 {
                out.uncoalesced += 1;
                let i = monotone_coupled_z_step(spec, &mut z, &mut zt, &mut src);
                let (a, b) = (prev[i], prev_t[i]);
                let (x, y) = (z.get(i), zt.get(i));
                prev[i] = x;
                prev_t[i] = y;
                sp += i64::from(x - a);
                sm += i64::from(y - b);
                diff = diff + u64::from(x != y) - u64::from(a != b);
                let was_inv = a < b;
                let is_inv = x < y;
                inversions = inversions + u64::from(is_inv) - u64::from(was_inv);
                if inversions > 0 {
                    out.violations += 1;
                }
            } else {
                // coalesced: one chain, same draws
                let i = z_chain_step(spec, &mut z, &mut src);
                sp += i64::from(z.get(i) - prev[i]);
                prev[i] = z.get(i);
                sm = sp;
            }
            out.total += before;
            out.next_total += 2 * diff;
        }
        if next < times.len() && times[next] == t {
            out.plus.push(sp);
            out.minus.push(sm);
            out.dist.push(2 * diff as u32);
            next += 1;
        }
    }
    out
}

/// Runs `replicas` coupled pairs; replica `r` draws from stream `r` of `seed`.
pub fn simulate_coupled(spec: &ChainSpec, params: &CouplingParams, seed: u64) -> Result<CoupledRun> {
    if spec.variant() != Variant::ZChain {
        return Err(Error::InvalidInput("coupling runs the projected chain".into()));
    }
    params.validate()?;
    let times = params.times();
    let reps = map_indexed(params.replicas, |r| run_replica(spec, &times, seed, r));
    let mut run = CoupledRun {
        k: spec.k(),
        times,
        plus_sums: Vec::with_capacity(reps.len()),
        minus_sums: Vec::with_capacity(reps.len()),
        distances: Vec::with_capacity(reps.len()),
        next_distance_total: Vec::with_capacity(reps.len()),
        distance_total: Vec::with_capacity(reps.len()),
        order_violations: 0,
        coupled_steps: params.horizon * params.replicas as u64,
        uncoalesced_steps: 0,
    };
    for r in reps {
        run.order_violations += r.violations;
        run.uncoalesced_steps += r.uncoalesced;
        run.plus_sums.push(r.plus);
        run.minus_sums.push(r.minus);
        run.distances.push(r.dist);
        run.next_distance_total.push(r.next_total);
        run.distance_total.push(r.total);
    }
    Ok(run)
}

impl CoupledRun {
    fn column<T: Copy + Into<f64>>(rows: &[Vec<T>], c: usize) -> Vec<f64> {
        rows.iter().map(|r| r[c].into()).collect()
    }

    /// Ratio estimate of the one-step factor `E[D_{t+1}] / E[D_t]` pooled
    /// over time, with its delta-method standard error over replicas.
    pub fn step_factor(&self) -> (f64, f64) {
        let m = self.distance_total.len() as f64;
        let x: Vec<f64> = self.distance_total.iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = self.next_distance_total.iter().map(|&v| v as f64).collect();
        let xm = x.iter().sum::<f64>() / m;
        let ym = y.iter().sum::<f64>() / m;
        if xm == 0.0 {
            return (f64::NAN, f64::NAN);
        }
        let rho = ym / xm;
        let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - rho * a).collect();
        let rm = resid.iter().sum::<f64>() / m;
        let var = resid.iter().map(|r| (r - rm).powi(2)).sum::<f64>() / (m - 1.0);
        (rho, (var / m).sqrt() / xm)
    }
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mean = x.iter().sum::<f64>() / m;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Covariance sum over `F` when the components are small enough to enumerate.
fn exact_covariance_sum(model: &IsingModel, subset: &[usize], limits: &Limits) -> Option<f64> {
    ComponentData::new(model, limits)
        .ok()
        .map(|d| covariance_sum(&d.covariance(), subset))
}

struct Prepared {
    spec: ChainSpec,
    run: CoupledRun,
    covariance_sum: Option<f64>,
    hypothesis: bool,
}

fn prepare(
    model: &IsingModel,
    subset: &[usize],
    params: &CouplingParams,
    seed: u64,
    limits: &Limits,
    report: &mut CheckReport,
) -> Result<Prepared> {
    let spec = ChainSpec::z_chain(model, subset.to_vec(), limits)?;
    let run = simulate_coupled(&spec, params, seed)?;
    let cs = exact_covariance_sum(model, spec.subset(), limits);
    let hypothesis = !model.has_field() && cs.is_some_and(|c| c <= 0.5);
    report.seed = Some(seed);
    report.certificate = Certificate::MonteCarlo {
        confidence: params.confidence,
        samples: params.replicas as u64,
    };
    report.detail("k", spec.k());
    report.detail("subset", spec.subset());
    report.detail("horizon", params.horizon);
    report.detail("replicas", params.replicas);
    report.detail("covariance_sum", cs);
    report.detail("hypothesis_holds", hypothesis);
    report.detail("order_violations", run.order_violations);
    report.detail("coupled_steps", run.coupled_steps);
    report.detail("uncoalesced_steps", run.uncoalesced_steps);
    Ok(Prepared {
        spec,
        run,
        covariance_sum: cs,
        hypothesis,
    })
}

/// Coupled distance from (all-plus, all-minus) decays at least as fast as
/// `2|F| (1 - 1/(2|F|))^t`, given `Σ_{u≠w∈F} Cov <= 1/2` and zero field.
pub fn check_contraction(
    model: &IsingModel,
    subset: &[usize],
    params: &CouplingParams,
    seed: u64,
    limits: &Limits,
) -> CheckReport {
    let mut report = CheckReport::new(
        "contraction",
        "E sum_F |z_t - z~_t| <= (1 - 1/(2|F|))^t * 2|F|",
        format!("{} |F|={}", describe(model), subset.len()),
    );
    let p = match prepare(model, subset, params, seed, limits, &mut report) {
        Ok(p) => p,
        Err(e) => return report.failed_to_run(&e),
    };
    let k = p.spec.k() as f64;
    let delta = (1.0 - params.confidence) / p.run.times.len() as f64;
    let radius = hoeffding_radius(params.replicas, 2.0 * k, delta);
    let mut observed = Vec::new();
    let mut bound = Vec::new();
    let mut margin = f64::INFINITY;
    for (c, &t) in p.run.times.iter().enumerate() {
        let (mean, se) = mean_se(&CoupledRun::column(&p.run.distances, c));
        let b = 2.0 * k * (1.0 - 1.0 / (2.0 * k)).powf(t as f64);
        margin = margin.min(b + radius - mean);
        observed.push(SeriesPoint {
            t,
            value: mean,
            ci: radius,
            se,
        });
        bound.push((t, b));
    }
    let (rho, rho_se) = p.run.step_factor();
    report.detail("step_factor", rho);
    report.detail("step_factor_se", rho_se);
    report.detail("target_factor", 1.0 - 1.0 / (2.0 * k));
    report.detail(
        "predicted_factor",
        p.covariance_sum.map(|c| 1.0 - (1.0 - c) / k),
    );
    report.series.push(Series {
        id: "distance".into(),
        points: observed,
    });
    report.series.push(Series::exact("distance_bound", bound));
    report.margin = Some(margin);
    report.verdict = if p.run.order_violations > 0 || margin < 0.0 {
        Verdict::Fail
    } else if !p.hypothesis {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };
    report
}

/// `Var(S_t) <= 16|F|` from either extreme start, for every recorded `t`.
pub fn check_variance_uniform(
    model: &IsingModel,
    subset: &[usize],
    params: &CouplingParams,
    seed: u64,
    limits: &Limits,
) -> CheckReport {
    let mut report = CheckReport::new(
        "variance_uniform",
        "Var_z(S_t) <= 16|F|",
        format!("{} |F|={}", describe(model), subset.len()),
    );
    let p = match prepare(model, subset, params, seed, limits, &mut report) {
        Ok(p) => p,
        Err(e) => return report.failed_to_run(&e),
    };
    let k = p.spec.k();
    let kf = k as f64;
    let cap = 16.0 * kf;
    let pairs = params.replicas / 2;
    // two starts per checkpoint
    let delta = (1.0 - params.confidence) / (2 * p.run.times.len()) as f64;
    let radius = hoeffding_radius(pairs, 2.0 * kf * kf, delta);
    let (mut lower_max, mut upper_max) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut margin = f64::INFINITY;
    for (id, rows) in [("variance_plus", &p.run.plus_sums), ("variance_minus", &p.run.minus_sums)] {
        let mut pts = Vec::new();
        for (c, &t) in p.run.times.iter().enumerate() {
            // W = (S_a - S_b)² / 2 over disjoint pairs is unbiased for Var
            let w: Vec<f64> = (0..pairs)
                .map(|j| {
                    let d = (rows[2 * j][c] - rows[2 * j + 1][c]) as f64;
                    d * d / 2.0
                })
                .collect();
            let (mean, se) = mean_se(&w);
            lower_max = lower_max.max(mean - radius);
            upper_max = upper_max.max(mean + radius);
            margin = margin.min(cap - mean);
            pts.push(SeriesPoint {
                t,
                value: mean,
                ci: radius,
                se,
            });
        }
        report.series.push(Series {
            id: id.into(),
            points: pts,
        });
    }
    // independent fair spins: an l1 contraction with factor 1 - 1/k and
    // one-step range 2, so Var(S_t) <= 8 / (1 - (1 - 1/k)²) at every t
    let rho = 1.0 - 1.0 / kf;
    let synthetic_cap = 8.0 / (1.0 - rho * rho);
    let mut occ = OccupancyLaw::new(k);
    let mut synthetic_max: f64 = 0.0;
    for _ in 0..=params.horizon {
        synthetic_max = synthetic_max.max(occ.sum_moments().1);
        occ.step();
    }
    let synthetic_margin = synthetic_cap - synthetic_max;
    report.detail("synthetic_cap", synthetic_cap);
    report.detail("synthetic_max_variance", synthetic_max);
    report.detail("synthetic_margin", synthetic_margin);
    let stationary = ComponentData::new(model, limits)
        .ok()
        .and_then(|d| d.subset_sum_law(p.spec.subset()).ok())
        .map(|law| {
            let mean: f64 = law.iter().enumerate().map(|(j, q)| q * (2.0 * j as f64 - kf)).sum();
            law.iter()
                .enumerate()
                .map(|(j, q)| q * (2.0 * j as f64 - kf - mean).powi(2))
                .sum::<f64>()
        });
    report.detail("stationary_variance", stationary);
    report.detail("cap", cap);
    report.detail("radius", radius);
    let stationary_ok = stationary.is_none_or(|v| v <= cap);
    report.margin = Some(margin.min(synthetic_margin));
    report.verdict = if lower_max > cap || synthetic_margin < 0.0 || !stationary_ok {
        Verdict::Fail
    } else if !p.hypothesis || upper_max > cap {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };
    report
}

/// `E_+ S_t >= |F| (1 - 1/|F|)^t` for nonnegative fields.
pub fn check_expectation_decay(
    model: &IsingModel,
    subset: &[usize],
    params: &CouplingParams,
    seed: u64,
    limits: &Limits,
) -> CheckReport {
    let mut report = CheckReport::new(
        "expectation_decay",
        "E_+ S_t >= |F| (1 - 1/|F|)^t",
        format!("{} |F|={}", describe(model), subset.len()),
    );
    let p = match prepare(model, subset, params, seed, limits, &mut report) {
        Ok(p) => p,
        Err(e) => return report.failed_to_run(&e),
    };
    let kf = p.spec.k() as f64;
    let delta = (1.0 - params.confidence) / p.run.times.len() as f64;
    let radius = hoeffding_radius(params.replicas, 2.0 * kf, delta);
    let mut observed = Vec::new();
    let mut bound = Vec::new();
    let mut margin = f64::INFINITY;
    for (c, &t) in p.run.times.iter().enumerate() {
        let col: Vec<f64> = p.run.plus_sums.iter().map(|r| r[c] as f64).collect();
        let (mean, se) = mean_se(&col);
        let b = kf * (1.0 - 1.0 / kf).powf(t as f64);
        margin = margin.min(mean + radius - b);
        observed.push(SeriesPoint {
            t,
            value: mean,
            ci: radius,
            se,
        });
        bound.push((t, b));
    }
    report.series.push(Series {
        id: "mean_plus".into(),
        points: observed,
    });
    report.series.push(Series::exact("mean_bound", bound));
    let applicable = model.field().iter().all(|&h| h >= 0.0);
    report.detail("nonnegative_field", applicable);
    report.margin = Some(margin);
    report.verdict = if !applicable {
        Verdict::Indeterminate
    } else if margin < 0.0 {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Edge;

    #[test]
    fn coupled_run_is_ordered_and_absorbing() {
        let m = IsingModel::new(
            4,
            vec![Edge { u: 0, v: 1, j: 0.3 }, Edge { u: 2, v: 3, j: 0.2 }],
        )
        .unwrap();
        let spec = ChainSpec::z_chain(&m, vec![0, 2, 3], &Limits::default()).unwrap();
        let params = CouplingParams::new(200, 50);
        let run = simulate_coupled(&spec, &params, 9).unwrap();
        assert_eq!(run.order_violations, 0);
        for (r, row) in run.distances.iter().enumerate() {
            assert_eq!(row[0], 6);
            let first_zero = row.iter().position(|&d| d == 0);
            if let Some(i) = first_zero {
                assert!(row[i..].iter().all(|&d| d == 0));
                assert!(run.plus_sums[r][i..]
                    .iter()
                    .zip(&run.minus_sums[r][i..])
                    .all(|(a, b)| a == b));
            }
        }
        assert_eq!(simulate_coupled(&spec, &params, 9).unwrap(), run);
    }

    #[test]
    fn independent_spins_pass_all_three() {
        let m = IsingModel::empty(8).unwrap();
        let f: Vec<usize> = (0..8).collect();
        let lim = Limits::default();
        let params = CouplingParams::new(100, 400);
        for r in [
            check_contraction(&m, &f, &params, 1, &lim),
            check_variance_uniform(&m, &f, &params, 1, &lim),
            check_expectation_decay(&m, &f, &params, 1, &lim),
        ] {
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
        let c = check_contraction(&m, &f, &params, 1, &lim);
        let rho = c.details["step_factor"].as_f64().unwrap();
        let se = c.details["step_factor_se"].as_f64().unwrap();
        assert!((rho - 0.875).abs() < 4.0 * se + 1e-3, "{rho} ± {se}");
        let e = check_expectation_decay(&m, &f, &params, 1, &lim);
        assert_eq!(e.series("mean_plus").unwrap().points[0].value, 8.0);
    }

    #[test]
    fn hypothesis_failure_is_indeterminate() {
        let m = IsingModel::new(2, vec![Edge { u: 0, v: 1, j: 3.0 }]).unwrap();
        let r = check_contraction(&m, &[0, 1], &CouplingParams::new(50, 20), 2, &Limits::default());
        assert_eq!(r.details["hypothesis_holds"], serde_json::json!(false));
        assert_ne!(r.verdict, Verdict::Pass);
    }
}
