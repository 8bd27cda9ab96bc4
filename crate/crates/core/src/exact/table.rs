use serde::{Deserialize, Serialize};

use super::Limits;
use crate::error::{Error, Result};
use crate::spin::IsingModel;

/// Explicit probability vector over `{±1}^sites`, indexed by the canonical
/// configuration bijection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    n: usize,
    probs: Vec<f64>,
    log_z: Option<f64>,
    /// Original vertex labels of the sites, when the table is a projection.
    sites: Vec<usize>,
}

impl DistributionTable {
    /// Wraps a probability vector; checks length, sign and normalization.
    pub fn from_probs(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidInput("negative or NaN probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self {
            n,
            probs,
            log_z: None,
            sites: (0..n).collect(),
        })
    }

    pub fn point_mass(n: usize, index: u64) -> Self {
        let mut probs = vec![0.0; 1 << n];
        probs[index as usize] = 1.0;
        Self {
            n,
            probs,
            log_z: None,
            sites: (0..n).collect(),
        }
    }

    pub fn uniform(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            probs: vec![1.0 / dim as f64; dim],
            log_z: Some(n as f64 * std::f64::consts::LN_2),
            sites: (0..n).collect(),
        }
    }

    pub(crate) fn from_raw(n: usize, probs: Vec<f64>) -> Self {
        Self {
            n,
            probs,
            log_z: None,
            sites: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: u64) -> f64 {
        self.probs[index as usize]
    }

    pub fn log_z(&self) -> Option<f64> {
        self.log_z
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, x)| p * x).sum()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean = self.expectation(f);
        self.probs
            .iter()
            .zip(f)
            .map(|(p, x)| p * (x - mean) * (x - mean))
            .sum()
    }

    /// Law of the sum of spins: entry `j` is `P(S = 2j - n)`.
    pub fn sum_law(&self) -> Vec<f64> {
        let mut law = vec![0.0; self.n + 1];
        for (i, p) in self.probs.iter().enumerate() {
            law[(i as u64).count_ones() as usize] += p;
        }
        law
    }
}

/// Sum of spins as a function table over `{±1}^n`.
pub fn sum_of_spins_table(n: usize) -> Vec<f64> {
    (0..1u64 << n)
        .map(|i| 2.0 * f64::from(i.count_ones()) - n as f64)
        .collect()
}

fn check_table_size(what: &'static str, n: usize, limits: &Limits) -> Result<()> {
    if n > limits.enumeration() {
        return Err(Error::Capacity {
            what,
            size: n,
            limit: limits.enumeration(),
        });
    }
    Ok(())
}

/// The Gibbs measure of `model` by full enumeration.
pub fn gibbs_distribution(model: &IsingModel, limits: &Limits) -> Result<DistributionTable> {
    let n = model.n();
    check_table_size("gibbs table sites", n, limits)?;
    let energies: Vec<f64> = (0..1u64 << n).map(|i| model.log_weight_index(i)).collect();
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = energies.iter().map(|e| (e - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(DistributionTable {
        n,
        probs,
        log_z: Some(max + z.ln()),
        sites: (0..n).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub magnetization: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl Moments {
    /// `Σ_{u != v in subset} C_uv` over ordered pairs.
    pub fn covariance_sum(&self, subset: &[usize]) -> f64 {
        covariance_sum(&self.covariance, subset)
    }
}

pub fn covariance_sum(cov: &[Vec<f64>], subset: &[usize]) -> f64 {
    let mut total = 0.0;
    for &u in subset {
        for &v in subset {
            if u != v {
                total += cov[u][v];
            }
        }
    }
    total
}

/// Magnetizations `m_v = E[σ(v)]` and covariances `C_uv`.
pub fn moments(dist: &DistributionTable) -> Moments {
    let n = dist.n;
    let mut m = vec![0.0; n];
    let mut second = vec![vec![0.0; n]; n];
    let mut spins = vec![0.0; n];
    for (i, &p) in dist.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (v, s) in spins.iter_mut().enumerate() {
            *s = if (i >> v) & 1 == 1 { 1.0 } else { -1.0 };
        }
        for u in 0..n {
            m[u] += p * spins[u];
            let pu = p * spins[u];
            for v in (u + 1)..n {
                second[u][v] += pu * spins[v];
            }
        }
    }
    let mut cov = vec![vec![0.0; n]; n];
    for u in 0..n {
        cov[u][u] = 1.0 - m[u] * m[u];
        for v in (u + 1)..n {
            let c = second[u][v] - m[u] * m[v];
            cov[u][v] = c;
            cov[v][u] = c;
        }
    }
    Moments {
        magnetization: m,
        covariance: cov,
    }
}

/// All local magnetizations without materializing the table.
pub fn magnetizations(model: &IsingModel, limits: &Limits) -> Result<Vec<f64>> {
    let n = model.n();
    check_table_size("magnetization sites", n, limits)?;
    let energies: Vec<f64> = (0..1u64 << n).map(|i| model.log_weight_index(i)).collect();
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut acc = vec![0.0; n];
    for (i, e) in energies.iter().enumerate() {
        let w = (e - max).exp();
        z += w;
        for (v, a) in acc.iter_mut().enumerate() {
            if (i >> v) & 1 == 1 {
                *a += w;
            } else {
                *a -= w;
            }
        }
    }
    Ok(acc.into_iter().map(|a| a / z).collect())
}

/// `E[σ(u) | σ(v) = s for (v, s) in clamped]` by enumerating the free sites.
pub fn conditional_magnetization(
    model: &IsingModel,
    u: usize,
    clamped: &[(usize, i8)],
    limits: &Limits,
) -> Result<f64> {
    let n = model.n();
    if u >= n {
        return Err(Error::InvalidInput(format!("vertex {u} out of range")));
    }
    let mut fixed = 0u64;
    let mut base = 0u64;
    for &(v, s) in clamped {
        if v >= n {
            return Err(Error::InvalidInput(format!("clamped vertex {v} out of range")));
        }
        if s != 1 && s != -1 {
            return Err(Error::InvalidInput(format!("clamped spin {s} is not ±1")));
        }
        if v == u {
            return Err(Error::InvalidInput(format!("vertex {u} is clamped")));
        }
        if fixed & (1 << v) != 0 {
            return Err(Error::InvalidInput(format!("vertex {v} clamped twice")));
        }
        fixed |= 1 << v;
        if s == 1 {
            base |= 1 << v;
        }
    }
    let free: Vec<usize> = (0..n).filter(|v| fixed & (1 << v) == 0).collect();
    check_table_size("conditional enumeration sites", free.len(), limits)?;
    let energies: Vec<(f64, bool)> = (0..1u64 << free.len())
        .map(|j| {
            let mut idx = base;
            for (b, &v) in free.iter().enumerate() {
                if (j >> b) & 1 == 1 {
                    idx |= 1 << v;
                }
            }
            (model.log_weight_index(idx), (idx >> u) & 1 == 1)
        })
        .collect();
    let max = energies
        .iter()
        .map(|e| e.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut acc) = (0.0, 0.0);
    for &(e, plus) in &energies {
        let w = (e - max).exp();
        z += w;
        acc += if plus { w } else { -w };
    }
    Ok(acc / z)
}

/// Marginal law of the spins on `subset`; site `i` of the result is vertex `subset[i]`.
pub fn project_distribution(dist: &DistributionTable, subset: &[usize]) -> Result<DistributionTable> {
    if subset.is_empty() {
        return Err(Error::InvalidInput("projection onto an empty set".into()));
    }
    let mut seen = 0u64;
    for &v in subset {
        if v >= dist.n {
            return Err(Error::InvalidInput(format!("vertex {v} out of range")));
        }
        if seen & (1 << v) != 0 {
            return Err(Error::InvalidInput(format!("vertex {v} repeated")));
        }
        seen |= 1 << v;
    }
    let k = subset.len();
    let mut probs = vec![0.0; 1 << k];
    for (i, &p) in dist.probs.iter().enumerate() {
        let mut j = 0usize;
        for (b, &v) in subset.iter().enumerate() {
            if (i >> v) & 1 == 1 {
                j |= 1 << b;
            }
        }
        probs[j] += p;
    }
    Ok(DistributionTable {
        n: k,
        probs,
        log_z: None,
        sites: subset.iter().map(|&v| dist.sites[v]).collect(),
    })
}

/// `½ Σ |p(x) - q(x)|`.
pub fn tv_distance(p: &DistributionTable, q: &DistributionTable) -> Result<f64> {
    tv_slices(&p.probs, &q.probs)
}

pub(crate) fn tv_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Smallest finite-difference step accepted by the GHS estimators.
pub const MIN_FD_STEP: f64 = 1e-6;

/// Central second difference of `m_v` in `(H_u, H_w)` at the model's field.
pub fn ghs_second_derivative(
    model: &IsingModel,
    v: usize,
    u: usize,
    w: usize,
    h: f64,
    limits: &Limits,
) -> Result<f64> {
    let n = model.n();
    if v >= n || u >= n || w >= n {
        return Err(Error::InvalidInput("vertex out of range".into()));
    }
    if !(h >= MIN_FD_STEP) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step {h} is below {MIN_FD_STEP}"
        )));
    }
    if model.field().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidInput(
            "concavity only holds for nonnegative fields".into(),
        ));
    }
    let m_at = |du: f64, dw: f64| -> Result<f64> {
        let mut field = model.field().to_vec();
        field[u] += du;
        field[w] += dw;
        Ok(magnetizations(&model.with_new_field(field)?, limits)?[v])
    };
    if u == w {
        let plus = m_at(h, 0.0)?;
        let mid = m_at(0.0, 0.0)?;
        let minus = m_at(-h, 0.0)?;
        Ok((plus - 2.0 * mid + minus) / (h * h))
    } else {
        let pp = m_at(h, h)?;
        let pm = m_at(h, -h)?;
        let mp = m_at(-h, h)?;
        let mm = m_at(-h, -h)?;
        Ok((pp - pm - mp + mm) / (4.0 * h * h))
    }
}

/// Second partial with a Richardson check at `h/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhsEstimate {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
    /// `|coarse - fine|`, the O(h²) truncation estimate.
    pub truncation: f64,
}

/// Second differences carry roughly `1e-16 / h²` of cancellation noise.
pub const GHS_NOISE_FLOOR: f64 = 1e-8;

impl GhsEstimate {
    /// Within ten truncation estimates (or the noise floor) of zero.
    pub fn sign_indeterminate(&self) -> bool {
        self.extrapolated.abs() <= (10.0 * self.truncation).max(GHS_NOISE_FLOOR)
    }
}

pub fn ghs_estimate(
    model: &IsingModel,
    v: usize,
    u: usize,
    w: usize,
    h: f64,
    limits: &Limits,
) -> Result<GhsEstimate> {
    let coarse = ghs_second_derivative(model, v, u, w, h, limits)?;
    let fine = ghs_second_derivative(model, v, u, w, h / 2.0, limits)?;
    Ok(GhsEstimate {
        coarse,
        fine,
        extrapolated: (4.0 * fine - coarse) / 3.0,
        truncation: (coarse - fine).abs(),
    })
}
