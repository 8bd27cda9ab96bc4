use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided Hoeffding radius for the mean of `samples` variables with the
/// given range: `range · sqrt(ln(1/δ) / (2m))`.
pub fn hoeffding_radius(samples: usize, range: f64, delta: f64) -> f64 {
    if samples == 0 {
        return f64::INFINITY;
    }
    range * ((1.0 / delta).ln() / (2.0 * samples as f64)).sqrt()
}

/// Stationary law of the statistic: exact, or Monte-Carlo samples.
#[derive(Debug, Clone, Copy)]
pub enum StationaryLaw<'a> {
    /// `law[j] = P(S* = 2j - k)`.
    Exact(&'a [f64]),
    Samples(&'a [i64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvLowerBound {
    pub threshold: f64,
    /// `P̂(S_T > r)` from the time-`T` samples.
    pub p_plus: f64,
    /// `P(S* > r)`, exact or estimated.
    pub p_star: f64,
    pub estimate: f64,
    pub radius: f64,
    /// `max(0, estimate - radius)`: holds with probability `confidence`.
    pub lower: f64,
    pub confidence: f64,
    pub plus_samples: usize,
    pub stationary_samples: Option<usize>,
}

/// Lower confidence bound on `TV(law(S_T), law(S*)) >= P(S_T > r) - P(S* > r)`.
pub fn statistic_tv_lower_bound(
    plus: &[i64],
    stationary: StationaryLaw<'_>,
    threshold: f64,
    confidence: f64,
) -> Result<TvLowerBound> {
    if plus.is_empty() {
        return Err(Error::InvalidInput("no time-T samples".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidInput(format!("confidence {confidence} outside (0, 1)")));
    }
    let delta = 1.0 - confidence;
    let above = |s: i64| (s as f64) > threshold;
    let p_plus = plus.iter().filter(|&&s| above(s)).count() as f64 / plus.len() as f64;
    let (p_star, radius, stationary_samples) = match stationary {
        StationaryLaw::Exact(law) => {
            if law.is_empty() {
                return Err(Error::InvalidInput("empty stationary law".into()));
            }
            let k = (law.len() - 1) as i64;
            let p: f64 = law
                .iter()
                .enumerate()
                .filter(|&(j, _)| above(2 * j as i64 - k))
                .map(|(_, p)| p)
                .sum();
            (p, hoeffding_radius(plus.len(), 1.0, delta), None)
        }
        StationaryLaw::Samples(star) => {
            if star.is_empty() {
                return Err(Error::InvalidInput("no stationary samples".into()));
            }
            let p = star.iter().filter(|&&s| above(s)).count() as f64 / star.len() as f64;
            let r = hoeffding_radius(plus.len(), 1.0, delta / 2.0)
                + hoeffding_radius(star.len(), 1.0, delta / 2.0);
            (p, r, Some(star.len()))
        }
    };
    let estimate = p_plus - p_star;
    Ok(TvLowerBound {
        threshold,
        p_plus,
        p_star,
        estimate,
        radius,
        lower: (estimate - radius).max(0.0),
        confidence,
        plus_samples: plus.len(),
        stationary_samples,
    })
}

/// Law of the number of never-updated sites after `t` uniform picks among
/// `k` sites, started from all `k` unvisited.
///
/// For independent fair spins started at all-plus, the unvisited sites are
/// still `+1` and the visited ones are fresh fair coins, so this law gives
/// the distribution of the sum of spins exactly.
#[derive(Debug, Clone)]
pub struct OccupancyLaw {
    k: usize,
    t: u64,
    law: Vec<f64>,
}

impl OccupancyLaw {
    pub fn new(k: usize) -> Self {
        let mut law = vec![0.0; k + 1];
        law[k] = 1.0;
        Self { k, t: 0, law }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `law()[u] = P(U_t = u)`.
    pub fn law(&self) -> &[f64] {
        &self.law
    }

    pub fn step(&mut self) {
        let k = self.k as f64;
        let mut next = vec![0.0; self.k + 1];
        for (u, &p) in self.law.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let hit = u as f64 / k;
            next[u] += p * (1.0 - hit);
            if u > 0 {
                next[u - 1] += p * hit;
            }
        }
        self.law = next;
        self.t += 1;
    }

    /// Mean and variance of the sum of spins:
    /// `E S = E U`, `Var S = E[k - U] + Var U`.
    pub fn sum_moments(&self) -> (f64, f64) {
        let k = self.k as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for (u, &p) in self.law.iter().enumerate() {
            m1 += p * u as f64;
            m2 += p * (u * u) as f64;
        }
        (m1, (k - m1) + (m2 - m1 * m1))
    }

    /// Law of the number of `+1` spins: entry `j` is `P(S = 2j - k)`.
    pub fn sum_law(&self) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k + 1];
        // row m of the halved Pascal triangle: Binomial(m, 1/2)
        let mut row = vec![1.0];
        let mut rows = vec![row.clone()];
        for _ in 0..k {
            let mut next = vec![0.0; row.len() + 1];
            for (j, &x) in row.iter().enumerate() {
                next[j] += 0.5 * x;
                next[j + 1] += 0.5 * x;
            }
            row = next;
            rows.push(row.clone());
        }
        for (u, &p) in self.law.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &b) in rows[k - u].iter().enumerate() {
                out[u + j] += p * b;
            }
        }
        out
    }
}
