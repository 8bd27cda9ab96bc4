use nalgebra::DMatrix;

use super::table::{gibbs_distribution, tv_slices, DistributionTable};
use super::Limits;
use crate::error::{Error, Result};
use crate::spin::{plus_probability, IsingModel, SpinConfig};

/// Detailed-balance residual accepted as reversible.
pub const REVERSIBILITY_TOLERANCE: f64 = 1e-10;

/// Row-stochastic matrix in compressed-row form, optionally paired with its
/// stationary law.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    stationary: Option<Vec<f64>>,
    balance_residual: Option<f64>,
}

impl TransitionMatrix {
    /// Dense constructor; zero entries are dropped.
    pub fn from_dense(rows: &[Vec<f64>], stationary: Option<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("row {x} is not stochastic")));
            }
            for (y, &p) in row.iter().enumerate() {
                if p != 0.0 {
                    cols.push(y);
                    vals.push(p);
                }
            }
            row_ptr.push(cols.len());
        }
        Self::assemble(dim, row_ptr, cols, vals, stationary)
    }

    fn assemble(
        dim: usize,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
        stationary: Option<Vec<f64>>,
    ) -> Result<Self> {
        if let Some(pi) = &stationary {
            if pi.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: pi.len(),
                });
            }
        }
        let mut m = Self {
            dim,
            row_ptr,
            cols,
            vals,
            stationary,
            balance_residual: None,
        };
        m.balance_residual = m.stationary.as_ref().map(|pi| m.detailed_balance_residual(pi));
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stationary(&self) -> Option<&[f64]> {
        self.stationary.as_deref()
    }

    /// Max over pairs of `|π(x)P(x,y) - π(y)P(y,x)|`.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.dim {
            for (y, p) in self.row(x) {
                let back = self.entry(y, x);
                worst = worst.max((pi[x] * p - pi[y] * back).abs());
            }
        }
        worst
    }

    pub fn balance_residual(&self) -> Option<f64> {
        self.balance_residual
    }

    pub fn is_reversible(&self) -> bool {
        self.balance_residual
            .is_some_and(|r| r < REVERSIBILITY_TOLERANCE)
    }

    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[x]..self.row_ptr[x + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        let span = self.row_ptr[x]..self.row_ptr[x + 1];
        match self.cols[span.clone()].binary_search(&y) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.dim)
            .map(|x| (self.row(x).map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row vector times matrix, `μP`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (x, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (y, p) in self.row(x) {
                out[y] += m * p;
            }
        }
        out
    }

    /// Matrix times column vector, `Pf`.
    pub fn apply_right(&self, f: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|x| self.row(x).map(|(y, p)| p * f[y]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for x in 0..self.dim {
            for (y, p) in self.row(x) {
                m[(x, y)] = p;
            }
        }
        m
    }
}

/// Heat-bath Glauber kernel of `model`, paired with its Gibbs measure.
pub fn glauber_transition_matrix(model: &IsingModel, limits: &Limits) -> Result<TransitionMatrix> {
    let n = model.n();
    if n > limits.enumeration() {
        return Err(Error::Capacity {
            what: "transition matrix sites",
            size: n,
            limit: limits.enumeration(),
        });
    }
    let pi = gibbs_distribution(model, limits)?;
    let dim = 1usize << n;
    let inv_n = 1.0 / n as f64;
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(dim * (n + 1));
    let mut vals = Vec::with_capacity(dim * (n + 1));
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(n + 1);
    for x in 0..dim {
        entries.clear();
        let mut stay = 0.0;
        for v in 0..n {
            let p_plus = plus_probability(model.local_field_index(x as u64, v));
            let is_plus = (x >> v) & 1 == 1;
            let (keep, flip) = if is_plus {
                (p_plus, 1.0 - p_plus)
            } else {
                (1.0 - p_plus, p_plus)
            };
            stay += keep;
            entries.push((x ^ (1 << v), inv_n * flip));
        }
        entries.push((x, inv_n * stay));
        entries.sort_unstable_by_key(|e| e.0);
        for &(y, p) in &entries {
            if p != 0.0 {
                cols.push(y);
                vals.push(p);
            }
        }
        row_ptr.push(cols.len());
    }
    TransitionMatrix::assemble(dim, row_ptr, cols, vals, Some(pi.probs().to_vec()))
}

/// Heat-bath resampling of one site as an operator on distribution tables.
#[derive(Debug, Clone)]
pub struct SiteUpdate {
    n: usize,
    site: usize,
    /// `P(σ(site) = +1 | rest)`, indexed by configurations with the site bit cleared.
    p_plus: Vec<f64>,
}

impl SiteUpdate {
    pub fn new(model: &IsingModel, site: usize, limits: &Limits) -> Result<Self> {
        let n = model.n();
        if site >= n {
            return Err(Error::InvalidInput(format!("site {site} out of range")));
        }
        if n > limits.enumeration() {
            return Err(Error::Capacity {
                what: "site update sites",
                size: n,
                limit: limits.enumeration(),
            });
        }
        let bit = 1usize << site;
        let p_plus = (0..1usize << n)
            .map(|x| {
                if x & bit == 0 {
                    plus_probability(model.local_field_index(x as u64, site))
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self { n, site, p_plus })
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn apply(&self, dist: &DistributionTable) -> Result<DistributionTable> {
        if dist.n() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: dist.n(),
            });
        }
        let bit = 1usize << self.site;
        let p = dist.probs();
        let mut out = vec![0.0; p.len()];
        for x in 0..p.len() {
            if x & bit != 0 {
                continue;
            }
            let mass = p[x] + p[x | bit];
            let q = self.p_plus[x];
            out[x | bit] = mass * q;
            out[x] = mass * (1.0 - q);
        }
        Ok(DistributionTable::from_raw(self.n, out))
    }
}

/// Shorthand for a single application of [`SiteUpdate`].
pub fn single_site_update(
    model: &IsingModel,
    site: usize,
    dist: &DistributionTable,
    limits: &Limits,
) -> Result<DistributionTable> {
    SiteUpdate::new(model, site, limits)?.apply(dist)
}

/// `½ Σ_{x,y} (f(x) - f(y))² π(x) P(x,y)`.
pub fn dirichlet_form(p: &TransitionMatrix, pi: &DistributionTable, f: &[f64]) -> Result<f64> {
    if pi.dim() != p.dim() || f.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: if pi.dim() != p.dim() { pi.dim() } else { f.len() },
        });
    }
    let mut total = 0.0;
    for x in 0..p.dim() {
        let px = pi.probs()[x];
        for (y, pxy) in p.row(x) {
            let d = f[x] - f[y];
            total += d * d * px * pxy;
        }
    }
    Ok(0.5 * total)
}

/// `TV(δ_start P^t, π)` for `t = 0..=horizon`.
pub fn exact_tv_curve(
    model: &IsingModel,
    start: &SpinConfig,
    horizon: u64,
    limits: &Limits,
) -> Result<Vec<f64>> {
    if start.len() != model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            got: start.len(),
        });
    }
    let p = glauber_transition_matrix(model, limits)?;
    Ok(tv_curve(&p, start.index() as usize, horizon))
}

pub(crate) fn tv_curve(p: &TransitionMatrix, start: usize, horizon: u64) -> Vec<f64> {
    let pi = p.stationary().expect("kernel carries its stationary law");
    let mut mu = vec![0.0; p.dim()];
    mu[start] = 1.0;
    let mut out = Vec::with_capacity(horizon as usize + 1);
    out.push(tv_slices(&mu, pi).expect("same dimension"));
    for _ in 0..horizon {
        mu = p.apply_left(&mu);
        out.push(tv_slices(&mu, pi).expect("same dimension"));
    }
    out
}

/// Matrix-free steps taken before switching to repeated squaring.
const DIRECT_WORK_BUDGET: usize = 400_000_000;
/// Largest state space for the repeated-squaring phase.
const SQUARING_MAX_DIM: usize = 1024;
/// No mixing time beyond `2^MAX_DOUBLINGS` steps is searched for.
const MAX_DOUBLINGS: u32 = 60;

/// Least `t` with `TV(δ_start P^t, π) <= threshold`.
pub fn exact_mixing_time(
    model: &IsingModel,
    start: &SpinConfig,
    threshold: f64,
    limits: &Limits,
) -> Result<u64> {
    if start.len() != model.n() {
        return Err(Error::Dimension {
            expected: model.n(),
            got: start.len(),
        });
    }
    let p = glauber_transition_matrix(model, limits)?;
    mixing_time(&p, start.index() as usize, threshold)
}

/// Mixing time from a single state: direct iteration while cheap, then a
/// doubling search over dense powers `P^{2^j}`. Relies on TV to stationarity
/// being nonincreasing in `t`.
pub fn mixing_time(p: &TransitionMatrix, start: usize, threshold: f64) -> Result<u64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "TV threshold {threshold} outside (0, 1)"
        )));
    }
    let pi = p
        .stationary()
        .ok_or_else(|| Error::InvalidInput("kernel has no stationary law".into()))?;
    let mut mu = vec![0.0; p.dim()];
    mu[start] = 1.0;
    let tv = |m: &[f64]| tv_slices(m, pi).expect("same dimension");
    if tv(&mu) <= threshold {
        return Ok(0);
    }
    let nnz = p.vals.len().max(1);
    let direct_steps = (DIRECT_WORK_BUDGET / nnz).max(64) as u64;
    let mut t = 0u64;
    while t < direct_steps {
        mu = p.apply_left(&mu);
        t += 1;
        if tv(&mu) <= threshold {
            return Ok(t);
        }
    }
    if p.dim() > SQUARING_MAX_DIM {
        return Err(Error::Horizon { horizon: t });
    }
    let row = |m: &DMatrix<f64>, v: &[f64]| -> Vec<f64> {
        let r = nalgebra::DVector::from_column_slice(v).transpose() * m;
        r.iter().copied().collect()
    };
    let mut powers = vec![p.to_dense()];
    loop {
        let last = powers.last().expect("nonempty");
        if tv(&row(last, &mu)) <= threshold {
            break;
        }
        if powers.len() as u32 >= MAX_DOUBLINGS {
            return Err(Error::Horizon {
                horizon: t + (1u64 << (powers.len() - 1)),
            });
        }
        let sq = last * last;
        powers.push(sq);
    }
    for j in (0..powers.len() - 1).rev() {
        let cand = row(&powers[j], &mu);
        if tv(&cand) > threshold {
            mu = cand;
            t += 1 << j;
        }
    }
    Ok(t + 1)
}
