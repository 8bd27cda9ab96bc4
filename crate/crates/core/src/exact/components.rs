//! Exact quantities for models whose coupling graph splits into small
//! connected components.
//!
//! Spins in different components are independent under the Gibbs measure,
//! and the Glauber chain is the product chain that picks component `c` with
//! probability `n_c / n`. So covariances are block diagonal, the law of a
//! subset sum is a convolution, and `gap = min_c (n_c / n) gap_c`.

use serde::{Deserialize, Serialize};

use super::kernel::glauber_transition_matrix;
use super::spectral::spectral_data;
use super::table::{gibbs_distribution, moments, DistributionTable, Moments};
use super::Limits;
use crate::error::{Error, Result};
use crate::spin::{plus_probability, IsingModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    /// Vertices of the component in the parent model, ascending.
    pub vertices: Vec<usize>,
    /// Induced model; site `i` is `vertices[i]`.
    pub model: IsingModel,
    pub gibbs: DistributionTable,
    pub moments: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentData {
    n: usize,
    components: Vec<ComponentSummary>,
}

impl ComponentData {
    /// Enumerates each component separately; a component above
    /// `limits.enumeration()` sites is a capacity error.
    pub fn new(model: &IsingModel, limits: &Limits) -> Result<Self> {
        let mut components = Vec::new();
        for vertices in model.components() {
            if vertices.len() > limits.enumeration() {
                return Err(Error::Capacity {
                    what: "connected component sites",
                    size: vertices.len(),
                    limit: limits.enumeration(),
                });
            }
            let sub = model.induced(&vertices)?;
            let gibbs = gibbs_distribution(&sub, limits)?;
            let moments = moments(&gibbs);
            components.push(ComponentSummary {
                vertices,
                model: sub,
                gibbs,
                moments,
            });
        }
        Ok(Self {
            n: model.n(),
            components,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[ComponentSummary] {
        &self.components
    }

    pub fn largest_component(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.vertices.len())
            .max()
            .unwrap_or(0)
    }

    pub fn magnetization(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for c in &self.components {
            for (i, &v) in c.vertices.iter().enumerate() {
                m[v] = c.moments.magnetization[i];
            }
        }
        m
    }

    /// Full `n × n` covariance matrix; zero across components.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let mut cov = vec![vec![0.0; self.n]; self.n];
        for c in &self.components {
            for (i, &u) in c.vertices.iter().enumerate() {
                for (j, &v) in c.vertices.iter().enumerate() {
                    cov[u][v] = c.moments.covariance[i][j];
                }
            }
        }
        cov
    }

    /// Law of `S_F = Σ_{v∈F} σ(v)` under the Gibbs measure: entry `j` is
    /// `P(S_F = 2j - |F|)`.
    pub fn subset_sum_law(&self, subset: &[usize]) -> Result<Vec<f64>> {
        let mut member = vec![false; self.n];
        for &v in subset {
            if v >= self.n || member[v] {
                return Err(Error::InvalidInput(format!(
                    "subset vertex {v} out of range or repeated"
                )));
            }
            member[v] = true;
        }
        let mut law = vec![1.0];
        for c in &self.components {
            let local: Vec<usize> = (0..c.vertices.len())
                .filter(|&i| member[c.vertices[i]])
                .collect();
            if local.is_empty() {
                continue;
            }
            let mask: u64 = local.iter().fold(0, |m, &i| m | (1 << i));
            let mut part = vec![0.0; local.len() + 1];
            for (idx, &p) in c.gibbs.probs().iter().enumerate() {
                part[((idx as u64) & mask).count_ones() as usize] += p;
            }
            law = convolve(&law, &part);
        }
        Ok(law)
    }

    /// `Var_π(S)` for the sum of all spins.
    pub fn sum_variance(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.moments.covariance.iter().flatten().sum::<f64>())
            .sum()
    }

    /// Dirichlet form of the sum of all spins under the Glauber chain on the
    /// whole model: `(2 / n) Σ_v E_π[P(σ(v) flips)]`.
    pub fn sum_dirichlet_form(&self) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            let k = c.vertices.len();
            for (x, &p) in c.gibbs.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for v in 0..k {
                    let s = if (x >> v) & 1 == 1 { 1.0 } else { -1.0 };
                    let m = c.model.local_field_index(x as u64, v);
                    total += p * plus_probability(-s * m);
                }
            }
        }
        2.0 * total / self.n as f64
    }

    /// Spectral gap of the Glauber chain on the whole model.
    pub fn gap(&self, limits: &Limits) -> Result<f64> {
        let mut gap = f64::INFINITY;
        for c in &self.components {
            let k = c.vertices.len();
            let local = if k == 1 {
                // one site: the heat-bath kernel is rank one
                1.0
            } else {
                spectral_data(&glauber_transition_matrix(&c.model, limits)?)?.gap
            };
            gap = gap.min(k as f64 / self.n as f64 * local);
        }
        Ok(gap)
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
