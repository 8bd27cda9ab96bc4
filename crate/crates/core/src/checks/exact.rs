use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;

use super::{describe, CheckReport, Certificate, Series, Verdict};
use crate::dynamics::RngStream;
use crate::error::{Error, Result};
use crate::exact::kernel::{dirichlet_form, glauber_transition_matrix, mixing_time, tv_curve, SiteUpdate};
use crate::exact::order::dominance_margin;
use crate::exact::precise::{Dd, PreciseChain, PRECISE_MAX_SITES};
use crate::exact::spectral::{is_increasing, spectral_data};
use crate::exact::table::{
    conditional_magnetization, covariance_sum, ghs_estimate, gibbs_distribution, magnetizations,
    sum_of_spins_table, tv_distance, DistributionTable,
};
use crate::exact::Limits;
use crate::spin::IsingModel;

/// Largest second partial accepted as nonpositive.
pub const GHS_TOLERANCE: f64 = 1e-6;

/// Slack for identities evaluated by enumeration in f64.
const ROUNDOFF: f64 = 1e-12;

/// Points of the plus-start TV curve attached to gap reports.
const TV_SERIES_MAX: u64 = 2000;

/// `t_mix^+ >= ln 2 · (1/gap - 1)`, with `t_mix^+ = t_mix^-` when `H ≡ 0`.
pub fn check_gap_bound(model: &IsingModel, threshold: f64, limits: &Limits) -> CheckReport {
    let report = CheckReport::new(
        "gap_bound",
        "t_mix^+ >= ln 2 * (1/gap - 1)",
        describe(model),
    );
    match gap_bound_inner(model, threshold, limits, report.clone()) {
        Ok(r) => r,
        Err(e) => report.failed_to_run(&e),
    }
}

fn gap_bound_inner(
    model: &IsingModel,
    threshold: f64,
    limits: &Limits,
    mut report: CheckReport,
) -> Result<CheckReport> {
    let n = model.n();
    let p = glauber_transition_matrix(model, limits)?;
    let plus = (1usize << n) - 1;
    let symmetric = !model.has_field();
    let spectrum = spectral_data(&p)?;
    let (gap, t_plus, t_minus, margin, resolution, method);
    if n <= PRECISE_MAX_SITES {
        let chain = PreciseChain::new(model)?;
        let g = chain.gap();
        t_plus = chain.mixing_time(plus, threshold)?;
        t_minus = chain.mixing_time(0, threshold)?;
        let bound = Dd::LN_2 * (Dd::ONE / g - Dd::ONE);
        let t = if symmetric { t_plus } else { t_plus.max(t_minus) };
        gap = g.to_f64();
        margin = (Dd::new(t as f64) - bound).to_f64();
        // the kernel is built from f64 weights: relative error ~1e-15 on
        // both sides, far below the O(1) margins at stake
        resolution = 1e-15 * (bound.to_f64() + t as f64) + 1e-9;
        method = "double-double";
    } else {
        gap = spectrum.gap;
        t_plus = mixing_time(&p, plus, threshold)?;
        t_minus = mixing_time(&p, 0, threshold)?;
        let t = if symmetric { t_plus } else { t_plus.max(t_minus) };
        margin = t as f64 - std::f64::consts::LN_2 * (1.0 / gap - 1.0);
        // f64 eigenvalue error ~1e-14 moves the bound by 1e-14/gap²; TV
        // roundoff ~1e-13 moves t by 1e-13/(gap · threshold) steps
        resolution = if gap > 0.0 {
            1e-14 / (gap * gap) + 1e-13 / (gap * threshold) + 1.0
        } else {
            f64::INFINITY
        };
        method = "f64";
    }
    let bound = std::f64::consts::LN_2 * (1.0 / gap - 1.0);
    report.detail("gap", gap);
    report.detail("inverse_gap", 1.0 / gap);
    report.detail("bound", bound);
    report.detail("t_mix_plus", t_plus);
    report.detail("t_mix_minus", t_minus);
    report.detail("threshold", threshold);
    report.detail("method", method);
    report.detail("resolution", resolution);
    report.detail("eigenspace_dimension", (!spectrum.partial).then_some(spectrum.multiplicity));
    report.detail(
        "eigenfunction_increasing",
        is_increasing(&spectrum.second_eigenfunction, 1e-9),
    );
    report.margin = Some(margin);
    report.certificate = Certificate::Exact;
    let symmetric_ok = !symmetric || t_plus == t_minus;
    report.detail("symmetric_field", symmetric);
    report.detail("plus_minus_agree", t_plus == t_minus);
    report.verdict = if !symmetric_ok {
        Verdict::Fail
    } else if margin.abs() <= resolution {
        Verdict::Indeterminate
    } else if margin > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let horizon = t_plus.min(TV_SERIES_MAX);
    let curve = tv_curve(&p, plus, horizon);
    report
        .series
        .push(Series::exact("tv_plus", curve.into_iter().enumerate().map(|(t, v)| (t as u64, v))));
    Ok(report)
}

/// `Var_π(S) <= E(S) / gap` and `E(S) <= 2` for the sum of spins `S`.
pub fn check_variance_bound(model: &IsingModel, limits: &Limits) -> CheckReport {
    let report = CheckReport::new(
        "variance_bound",
        "Var(S) <= E(S) / gap, E(S) <= 2",
        describe(model),
    );
    match variance_bound_inner(model, limits, report.clone()) {
        Ok(r) => r,
        Err(e) => report.failed_to_run(&e),
    }
}

fn variance_bound_inner(model: &IsingModel, limits: &Limits, mut report: CheckReport) -> Result<CheckReport> {
    let n = model.n();
    let p = glauber_transition_matrix(model, limits)?;
    let pi = gibbs_distribution(model, limits)?;
    let s = sum_of_spins_table(n);
    let var = pi.variance(&s);
    let e = dirichlet_form(&p, &pi, &s)?;
    // an upper estimate of the gap lowers the right-hand side
    let gap_upper = if n <= PRECISE_MAX_SITES {
        let g = PreciseChain::new(model)?.gap().to_f64();
        g * (1.0 + 1e-15)
    } else {
        spectral_data(&p)?.gap + 1e-13
    };
    let rhs = e / gap_upper;
    let tol = ROUNDOFF.max(1e-9 * var);
    let margin = rhs - var;
    report.detail("variance", var);
    report.detail("dirichlet_form", e);
    report.detail("gap", gap_upper);
    report.detail("rhs", rhs);
    report.detail("two_n_ln_n", 2.0 * n as f64 * (n as f64).ln());
    report.margin = Some(margin.min(2.0 - e));
    report.certificate = Certificate::Exact;
    report.verdict = if margin >= -tol && e <= 2.0 + ROUNDOFF {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}

/// A `k`-subset `F` with `Σ_{u≠v∈F} C_uv <= (k²/n²) Σ_{i≠j} C_ij`.
///
/// Best of `m` random subsets followed by swap descent, with `m` doubled
/// until the bound is met and exhaustive search as the last resort.
pub fn select_low_cov_subset(cov: &[Vec<f64>], k: usize, seed: u64) -> Result<(Vec<usize>, CheckReport)> {
    let n = cov.len();
    if let Some(row) = cov.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: row.len(),
        });
    }
    for (i, row) in cov.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i != j && !(c >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) = {c} is not a nonnegative number"
                )));
            }
        }
    }
    if k > n {
        return Err(Error::InvalidInput(format!("k = {k} exceeds n = {n}")));
    }
    let all: Vec<usize> = (0..n).collect();
    let total = covariance_sum(cov, &all);
    let bound = if n == 0 {
        0.0
    } else {
        (k * k) as f64 / (n * n) as f64 * total
    };
    let accept = |s: f64| s <= bound + ROUNDOFF * bound.abs().max(1.0);
    let mut rng = RngStream::new(seed, 0);
    let mut draws = 0usize;
    let mut m = 64usize;
    let mut best: Option<(Vec<usize>, f64)> = None;
    while m <= 1 << 16 {
        for _ in 0..m {
            let mut f: Vec<usize> = sample(rng.rng(), n, k).into_vec();
            f.sort_unstable();
            let s = covariance_sum(cov, &f);
            if best.as_ref().is_none_or(|b| s < b.1) {
                best = Some((f, s));
            }
        }
        draws += m;
        let (f, s) = best.take().expect("at least one draw");
        let (f, s) = swap_descent(cov, f, s);
        let done = accept(s);
        best = Some((f, s));
        if done {
            break;
        }
        m *= 2;
    }
    let (mut f, mut s) = best.expect("at least one draw");
    let mut method = "random+swap";
    if !accept(s) {
        if binomial(n, k) > 1e7 {
            return Err(Error::InvalidInput(
                "no subset meeting the bound was found".into(),
            ));
        }
        let (ef, es) = exhaustive_subset(cov, k);
        f = ef;
        s = es;
        method = "exhaustive";
    }
    f.sort_unstable();
    let mut report = CheckReport::new(
        "covariance_subset",
        "sum_{u!=v in F} C_uv <= (k^2/n^2) sum_{i!=j} C_ij",
        format!("n={n} k={k}"),
    );
    report.seed = Some(seed);
    report.certificate = Certificate::Exact;
    report.margin = Some(bound - s);
    report.verdict = if accept(s) { Verdict::Pass } else { Verdict::Fail };
    report.detail("subset", &f);
    report.detail("covariance_sum", s);
    report.detail("bound", bound);
    report.detail("total", total);
    report.detail("random_draws", draws);
    report.detail("method", method);
    Ok((f, report))
}

fn swap_descent(cov: &[Vec<f64>], mut f: Vec<usize>, mut s: f64) -> (Vec<usize>, f64) {
    let n = cov.len();
    let mut member = vec![false; n];
    for &v in &f {
        member[v] = true;
    }
    let pair = |a: usize, b: usize| cov[a][b] + cov[b][a];
    for _ in 0..100 {
        let mut improved = false;
        for i in 0..f.len() {
            let u = f[i];
            let ru: f64 = f.iter().filter(|&&w| w != u).map(|&w| pair(u, w)).sum();
            let mut best_v = None;
            let mut best_delta = -1e-14 * s.abs().max(1.0);
            for v in 0..n {
                if member[v] {
                    continue;
                }
                let rv: f64 = f.iter().filter(|&&w| w != u).map(|&w| pair(v, w)).sum();
                let delta = rv - ru;
                if delta < best_delta {
                    best_delta = delta;
                    best_v = Some(v);
                }
            }
            if let Some(v) = best_v {
                member[u] = false;
                member[v] = true;
                f[i] = v;
                s = covariance_sum(cov, &f);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (f, s)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn exhaustive_subset(cov: &[Vec<f64>], k: usize) -> (Vec<usize>, f64) {
    let n = cov.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = (idx.clone(), covariance_sum(cov, &idx));
    loop {
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
        let s = covariance_sum(cov, &idx);
        if s < best.1 {
            best = (idx.clone(), s);
        }
    }
}

/// All second partials `∂²m_v/∂H_u∂H_w` nonpositive at every grid field.
pub fn check_ghs_concavity(model: &IsingModel, grid: &[Vec<f64>], h: f64, limits: &Limits) -> CheckReport {
    let report = CheckReport::new(
        "ghs_concavity",
        "d^2 m_v / dH_u dH_w <= 0 for H >= 0",
        describe(model),
    );
    match ghs_inner(model, grid, h, limits, report.clone()) {
        Ok(r) => r,
        Err(e) => report.failed_to_run(&e),
    }
}

fn ghs_inner(
    model: &IsingModel,
    grid: &[Vec<f64>],
    h: f64,
    limits: &Limits,
    mut report: CheckReport,
) -> Result<CheckReport> {
    let n = model.n();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    let (mut evaluated, mut near_zero, mut hard_fail, mut soft_fail) = (0usize, 0usize, 0usize, 0usize);
    for field in grid {
        if field.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: field.len(),
            });
        }
        if field.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidInput("grid fields must be nonnegative".into()));
        }
        let m = model.with_new_field(field.clone())?;
        for v in 0..n {
            for u in 0..n {
                for w in u..n {
                    let est = ghs_estimate(&m, v, u, w, h, limits)?;
                    evaluated += 1;
                    let indeterminate = est.sign_indeterminate();
                    if indeterminate {
                        near_zero += 1;
                    }
                    if est.extrapolated > GHS_TOLERANCE {
                        if indeterminate {
                            soft_fail += 1;
                        } else {
                            hard_fail += 1;
                        }
                    }
                    if est.extrapolated > worst {
                        worst = est.extrapolated;
                        worst_at = Some((field.clone(), v, u, w));
                    }
                }
            }
        }
    }
    report.detail("evaluated", evaluated);
    report.detail("indeterminate_sign", near_zero);
    report.detail("max_second_partial", worst);
    report.detail("worst_at", worst_at);
    report.detail("step", h);
    report.detail("tolerance", GHS_TOLERANCE);
    report.certificate = Certificate::Exact;
    report.margin = Some(if evaluated == 0 { 0.0 } else { -worst });
    report.verdict = if hard_fail > 0 {
        Verdict::Fail
    } else if soft_fail > 0 {
        Verdict::Indeterminate
    } else {
        Verdict::Pass
    };
    Ok(report)
}

/// `E[σ(u) | σ(v_i) = 1 ∀i] <= Σ_i E[σ(u) | σ(v_i) = 1]` at zero field, and
/// `f(x + y) - f(x) <= f(y) - f(0)` for `f(H) = m_u(H)` on `pairs` random
/// nonnegative fields.
pub fn check_subadditivity(
    model: &IsingModel,
    u: usize,
    targets: &[usize],
    pairs: usize,
    seed: u64,
    limits: &Limits,
) -> CheckReport {
    let mut report = CheckReport::new(
        "subadditivity",
        "E[s_u | s_vi = 1 all i] <= sum_i E[s_u | s_vi = 1]",
        format!("{} u={u} targets={targets:?}", describe(model)),
    );
    report.seed = Some(seed);
    match subadditivity_margins(model, u, targets, pairs, seed, limits) {
        Ok((conditional, field_form, worst)) => {
            report.detail("conditional_margin", conditional);
            report.detail("field_form_margin", field_form);
            report.detail("field_pairs", pairs);
            report.detail("worst_field_pair", worst);
            finish_exact(&mut report, conditional.min(field_form));
            report
        }
        Err(e) => report.failed_to_run(&e),
    }
}

type FieldPair = Option<(Vec<f64>, Vec<f64>)>;

fn subadditivity_margins(
    model: &IsingModel,
    u: usize,
    targets: &[usize],
    pairs: usize,
    seed: u64,
    limits: &Limits,
) -> Result<(f64, f64, FieldPair)> {
    let n = model.n();
    if model.has_field() {
        return Err(Error::InvalidInput("the base model must have zero field".into()));
    }
    if u >= n || targets.iter().any(|&v| v >= n || v == u) {
        return Err(Error::InvalidInput("targets must be vertices other than u".into()));
    }
    let clamped: Vec<(usize, i8)> = targets.iter().map(|&v| (v, 1)).collect();
    let joint = conditional_magnetization(model, u, &clamped, limits)?;
    let mut sum = 0.0;
    for &v in targets {
        sum += conditional_magnetization(model, u, &[(v, 1)], limits)?;
    }
    let conditional = sum - joint;
    let mut rng = RngStream::new(seed, 0);
    let f = |field: &[f64]| -> Result<f64> { Ok(magnetizations(&model.with_new_field(field.to_vec())?, limits)?[u]) };
    let f0 = f(&vec![0.0; n])?;
    let mut field_form = f64::INFINITY;
    let mut worst = None;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.rng().random::<f64>()).collect();
        let y: Vec<f64> = (0..n).map(|_| 2.0 * rng.rng().random::<f64>()).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let m = (f(&y)? - f0) - (f(&xy)? - f(&x)?);
        if m < field_form {
            field_form = m;
            worst = Some((x, y));
        }
    }
    Ok((conditional, field_form, worst))
}

fn finish_exact(report: &mut CheckReport, margin: f64) {
    report.certificate = Certificate::Exact;
    report.margin = Some(margin);
    report.verdict = if margin >= -ROUNDOFF {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
}

/// [`check_subadditivity`] for every `u` and every target set of size
/// `1..=max_targets` avoiding `u`.
pub fn check_subadditivity_all(
    model: &IsingModel,
    max_targets: usize,
    pairs: usize,
    seed: u64,
    limits: &Limits,
) -> CheckReport {
    let n = model.n();
    let mut report = CheckReport::new(
        "subadditivity",
        "E[s_u | s_vi = 1 all i] <= sum_i E[s_u | s_vi = 1]",
        format!("{} all u, |targets| <= {max_targets}", describe(model)),
    );
    report.seed = Some(seed);
    let mut worst = f64::INFINITY;
    let mut worst_case = None;
    let mut cases = 0usize;
    for u in 0..n {
        let mut field_form_done = false;
        for mask in 1u64..(1 << n) {
            let size = mask.count_ones() as usize;
            if mask & (1 << u) != 0 || size > max_targets {
                continue;
            }
            let targets: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
            // the field form depends on u only, so it runs once per u
            let p = if field_form_done { 0 } else { pairs };
            field_form_done = true;
            match subadditivity_margins(model, u, &targets, p, seed ^ u as u64, limits) {
                Ok((c, fm, _)) => {
                    cases += 1;
                    let m = c.min(fm);
                    if m < worst {
                        worst = m;
                        worst_case = Some((u, targets));
                    }
                }
                Err(e) => return report.failed_to_run(&e),
            }
        }
    }
    report.detail("cases", cases);
    report.detail("worst_case", worst_case);
    finish_exact(&mut report, if cases == 0 { 0.0 } else { worst });
    report
}

fn is_subsequence(sub: &[usize], seq: &[usize]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|s| it.any(|x| x == s))
}

/// Law after applying the updates of `seq` in order from all-plus.
fn law_after(updates: &[SiteUpdate], n: usize, seq: &[usize]) -> Result<DistributionTable> {
    let mut d = DistributionTable::point_mass(n, (1u64 << n) - 1);
    for &v in seq {
        d = updates[v].apply(&d)?;
    }
    Ok(d)
}

fn site_updates(model: &IsingModel, limits: &Limits) -> Result<Vec<SiteUpdate>> {
    (0..model.n()).map(|v| SiteUpdate::new(model, v, limits)).collect()
}

/// Censored run `ν` dominates the full run `μ`, and is no closer to `π`.
fn censoring_margins(
    mu: &DistributionTable,
    nu: &DistributionTable,
    pi: &DistributionTable,
    limits: &Limits,
) -> Result<(f64, f64)> {
    let dom = dominance_margin(nu, mu, limits)?;
    let tv = tv_distance(nu, pi)? - tv_distance(mu, pi)?;
    Ok((dom, tv))
}

pub fn check_censoring(model: &IsingModel, seq: &[usize], subseq: &[usize], limits: &Limits) -> CheckReport {
    let report = CheckReport::new(
        "censoring",
        "nu >= mu stochastically and TV(mu, pi) <= TV(nu, pi) from all-plus",
        format!("{} seq={seq:?} subseq={subseq:?}", describe(model)),
    );
    let run = || -> Result<(f64, f64)> {
        let n = model.n();
        if seq.iter().any(|&v| v >= n) {
            return Err(Error::InvalidInput("update site out of range".into()));
        }
        if !is_subsequence(subseq, seq) {
            return Err(Error::InvalidInput(format!(
                "{subseq:?} is not a subsequence of {seq:?}"
            )));
        }
        let updates = site_updates(model, limits)?;
        let pi = gibbs_distribution(model, limits)?;
        let mu = law_after(&updates, n, seq)?;
        let nu = law_after(&updates, n, subseq)?;
        censoring_margins(&mu, &nu, &pi, limits)
    };
    match run() {
        Ok((dom, tv)) => {
            let mut report = report;
            report.detail("dominance_margin", dom);
            report.detail("tv_margin", tv);
            finish_exact(&mut report, dom.min(tv));
            report
        }
        Err(e) => report.failed_to_run(&e),
    }
}

/// [`check_censoring`] over every sequence of length `<= max_len` and every
/// subsequence of it.
pub fn check_censoring_exhaustive(model: &IsingModel, max_len: usize, limits: &Limits) -> CheckReport {
    let report = CheckReport::new(
        "censoring",
        "nu >= mu stochastically and TV(mu, pi) <= TV(nu, pi) from all-plus",
        format!("{} all sequences of length <= {max_len}", describe(model)),
    );
    let run = || -> Result<(usize, f64, f64, Option<(Vec<usize>, Vec<usize>)>)> {
        let n = model.n();
        let updates = site_updates(model, limits)?;
        let pi = gibbs_distribution(model, limits)?;
        let mut laws: HashMap<Vec<usize>, DistributionTable> = HashMap::new();
        let mut frontier = vec![Vec::new()];
        laws.insert(Vec::new(), law_after(&updates, n, &[])?);
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &frontier {
                let base = laws[s].clone();
                for v in 0..n {
                    let mut t = s.clone();
                    t.push(v);
                    laws.insert(t.clone(), updates[v].apply(&base)?);
                    next.push(t);
                }
            }
            frontier = next;
        }
        let mut seqs: Vec<&Vec<usize>> = laws.keys().collect();
        seqs.sort();
        let (mut pairs, mut dom_min, mut tv_min, mut worst) = (0usize, f64::INFINITY, f64::INFINITY, None);
        for seq in seqs {
            let mu = &laws[seq];
            for mask in 0u64..(1 << seq.len()) {
                let sub: Vec<usize> = (0..seq.len())
                    .filter(|&i| mask & (1 << i) != 0)
                    .map(|i| seq[i])
                    .collect();
                let (dom, tv) = censoring_margins(mu, &laws[&sub], &pi, limits)?;
                pairs += 1;
                if dom.min(tv) < dom_min.min(tv_min) {
                    worst = Some((seq.clone(), sub));
                }
                dom_min = dom_min.min(dom);
                tv_min = tv_min.min(tv);
            }
        }
        Ok((pairs, dom_min, tv_min, worst))
    };
    match run() {
        Ok((pairs, dom, tv, worst)) => {
            let mut report = report;
            report.detail("pairs", pairs);
            report.detail("dominance_margin", dom);
            report.detail("tv_margin", tv);
            report.detail("worst_pair", worst);
            finish_exact(&mut report, dom.min(tv));
            report
        }
        Err(e) => report.failed_to_run(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Edge;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gap_bound_examples() {
        let lim = Limits::default();
        let r = check_gap_bound(&IsingModel::empty(4).unwrap(), 0.25, &lim);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_abs_diff_eq!(r.details["bound"].as_f64().unwrap(), 3.0 * std::f64::consts::LN_2, epsilon = 1e-12);
        assert_eq!(r.details["eigenspace_dimension"].as_u64(), Some(4));
        assert_eq!(r.details["eigenfunction_increasing"], true);
        let r = check_gap_bound(&IsingModel::empty(1).unwrap(), 0.25, &lim);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.details["t_mix_plus"].as_u64(), Some(1));
        let tv = &r.series("tv_plus").unwrap().points;
        assert_eq!((tv[0].value, tv[1].value), (0.5, 0.0));
    }

    #[test]
    fn variance_bound_equality_for_independent_spins() {
        let r = check_variance_bound(&IsingModel::empty(4).unwrap(), &Limits::default());
        assert_eq!(r.verdict, Verdict::Pass);
        assert_abs_diff_eq!(r.details["variance"].as_f64().unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.details["dirichlet_form"].as_f64().unwrap(), 1.0, epsilon = 1e-12);
        assert!(r.margin.unwrap().abs() < 1e-9);
    }

    #[test]
    fn subset_selection_examples() {
        let ones = vec![vec![1.0; 3]; 3];
        let (f, r) = select_low_cov_subset(&ones, 2, 1).unwrap();
        assert_eq!(f.len(), 2);
        assert_abs_diff_eq!(r.details["covariance_sum"].as_f64().unwrap(), 2.0);
        assert_abs_diff_eq!(r.details["bound"].as_f64().unwrap(), 4.0 / 9.0 * 6.0, epsilon = 1e-12);
        let neg = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        assert!(select_low_cov_subset(&neg, 1, 1).is_err());
        let zero = vec![vec![0.0; 4]; 4];
        let (_, r) = select_low_cov_subset(&zero, 3, 1).unwrap();
        assert_eq!(r.margin, Some(0.0));
    }

    #[test]
    fn exhaustive_subset_is_optimal() {
        let cov: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..6).map(|j| ((i * 7 + j * 3) % 5) as f64 + (i + j) as f64 * 0.1).collect())
            .collect();
        let (f, s) = exhaustive_subset(&cov, 3);
        assert_eq!(f.len(), 3);
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    assert!(s <= covariance_sum(&cov, &[a, b, c]) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn subadditivity_examples() {
        let lim = Limits::default();
        let e = IsingModel::new(2, vec![Edge { u: 0, v: 1, j: 0.5 }]).unwrap();
        let r = check_subadditivity(&e, 0, &[1], 4, 3, &lim);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_abs_diff_eq!(r.details["conditional_margin"].as_f64().unwrap(), 0.0, epsilon = 1e-15);
        let with_field = IsingModel::with_field(2, vec![], vec![0.1, 0.0]).unwrap();
        assert_eq!(check_subadditivity(&with_field, 0, &[1], 0, 0, &lim).verdict, Verdict::Error);
    }

    #[test]
    fn censoring_examples() {
        let lim = Limits::default();
        let path = IsingModel::new(
            3,
            vec![Edge { u: 0, v: 1, j: 0.5 }, Edge { u: 1, v: 2, j: 0.5 }],
        )
        .unwrap();
        let same = check_censoring(&path, &[0, 1, 2], &[0, 1, 2], &lim);
        assert_eq!(same.verdict, Verdict::Pass);
        assert_eq!(same.margin, Some(0.0));
        assert_eq!(check_censoring(&path, &[0, 1], &[1, 0], &lim).verdict, Verdict::Error);
        let all = check_censoring_exhaustive(&path, 3, &lim);
        assert_eq!(all.verdict, Verdict::Pass);
    }

    #[test]
    fn ghs_single_vertex() {
        let m = IsingModel::empty(1).unwrap();
        let r = check_ghs_concavity(&m, &[vec![1.0]], 1e-3, &Limits::default());
        assert_eq!(r.verdict, Verdict::Pass);
        let worst = r.details["max_second_partial"].as_f64().unwrap();
        // d²/dH² tanh(H) = -2 tanh(H) sech²(H)
        let exact = -2.0 * 1f64.tanh() / 1f64.cosh().powi(2);
        assert_abs_diff_eq!(worst, exact, epsilon = 1e-6);
    }
}
