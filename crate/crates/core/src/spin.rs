//! Ising model representation and single-configuration primitives.
//!
//! A configuration is a dense `±1` vector. Every exact table in the crate
//! indexes configurations by the bijection "bit `b` of the index is set iff
//! vertex `b` carries spin `+1`", see [`SpinConfig::index`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest vertex count for which a configuration maps to a `u64` index.
pub const MAX_INDEXED_SITES: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub j: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawModel {
    n: usize,
    edges: Vec<Edge>,
    field: Vec<f64>,
}

/// Ferromagnetic Ising model on `n` vertices with couplings `J_uv >= 0` and
/// an external field `H_v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct IsingModel {
    n: usize,
    edges: Vec<Edge>,
    field: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl TryFrom<RawModel> for IsingModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        IsingModel::with_field(raw.n, raw.edges, raw.field)
    }
}

impl From<IsingModel> for RawModel {
    fn from(m: IsingModel) -> Self {
        RawModel {
            n: m.n,
            edges: m.edges,
            field: m.field,
        }
    }
}

impl PartialEq for IsingModel {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges && self.field == other.field
    }
}

impl IsingModel {
    /// Zero-field model.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        Self::with_field(n, edges, vec![0.0; n])
    }

    pub fn with_field(n: usize, edges: Vec<Edge>, field: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one vertex".into()));
        }
        if field.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: field.len(),
            });
        }
        if let Some(h) = field.iter().find(|h| !h.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite field value {h}")));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidModel(format!(
                    "edge ({}, {}) has a vertex outside [0, {n})",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::InvalidModel(format!("self-loop at vertex {}", e.u)));
            }
            if !e.j.is_finite() || e.j < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "coupling J_{}{} = {} is negative; the model must be ferromagnetic (J >= 0)",
                    e.u, e.v, e.j
                )));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if !seen.insert(key) {
                return Err(Error::InvalidModel(format!(
                    "duplicate edge between {} and {}",
                    key.0, key.1
                )));
            }
            adjacency[e.u].push((e.v, e.j));
            adjacency[e.v].push((e.u, e.j));
        }
        Ok(Self {
            n,
            edges,
            field,
            adjacency,
        })
    }

    /// `n` isolated vertices.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn has_field(&self) -> bool {
        self.field.iter().any(|&h| h != 0.0)
    }

    pub fn coupling(&self, u: usize, v: usize) -> f64 {
        self.adjacency[u]
            .iter()
            .find(|&&(w, _)| w == v)
            .map_or(0.0, |&(_, j)| j)
    }

    /// Same couplings, different field.
    pub fn with_new_field(&self, field: Vec<f64>) -> Result<Self> {
        Self::with_field(self.n, self.edges.clone(), field)
    }

    fn check_len(&self, sigma: &SpinConfig) -> Result<()> {
        if sigma.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: sigma.len(),
            });
        }
        Ok(())
    }

    /// `Σ J_uv σ(u)σ(v) + Σ H_v σ(v)`.
    pub fn log_weight(&self, sigma: &SpinConfig) -> Result<f64> {
        self.check_len(sigma)?;
        let s = sigma.spins();
        let pair: f64 = self
            .edges
            .iter()
            .map(|e| e.j * f64::from(s[e.u] * s[e.v]))
            .sum();
        let ext: f64 = self
            .field
            .iter()
            .zip(s)
            .map(|(h, &x)| h * f64::from(x))
            .sum();
        Ok(pair + ext)
    }

    pub fn unnormalized_weight(&self, sigma: &SpinConfig) -> Result<f64> {
        Ok(self.log_weight(sigma)?.exp())
    }

    /// Log-weight of the configuration with the given enumeration index.
    pub fn log_weight_index(&self, index: u64) -> f64 {
        let spin = |v: usize| if (index >> v) & 1 == 1 { 1.0 } else { -1.0 };
        let pair: f64 = self.edges.iter().map(|e| e.j * spin(e.u) * spin(e.v)).sum();
        let ext: f64 = self
            .field
            .iter()
            .enumerate()
            .map(|(v, h)| h * spin(v))
            .sum();
        pair + ext
    }

    /// `Σ_u J_uv σ(u) + H_v`; does not read `σ(v)`.
    pub fn local_field(&self, sigma: &SpinConfig, v: usize) -> f64 {
        self.local_field_spins(sigma.spins(), v)
    }

    pub(crate) fn local_field_spins(&self, spins: &[i8], v: usize) -> f64 {
        self.adjacency[v]
            .iter()
            .fold(self.field[v], |acc, &(u, j)| acc + j * f64::from(spins[u]))
    }

    pub fn local_field_index(&self, index: u64, v: usize) -> f64 {
        self.adjacency[v].iter().fold(self.field[v], |acc, &(u, j)| {
            if (index >> u) & 1 == 1 {
                acc + j
            } else {
                acc - j
            }
        })
    }

    /// Conditional probability that `σ(v) = +1` given all other spins.
    pub fn heat_bath_probability(&self, sigma: &SpinConfig, v: usize) -> f64 {
        plus_probability(self.local_field(sigma, v))
    }

    /// Connected components of the coupling graph, vertices ascending.
    /// Zero-weight edges still connect.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for root in 0..self.n {
            if label[root] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![root];
            label[root] = id;
            let mut head = 0;
            while head < members.len() {
                let x = members[head];
                head += 1;
                for &(y, _) in &self.adjacency[x] {
                    if label[y] == usize::MAX {
                        label[y] = id;
                        members.push(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Model induced on `vertices`, relabelled `0..vertices.len()` in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            pos[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| pos[e.u] != usize::MAX && pos[e.v] != usize::MAX)
            .map(|e| Edge {
                u: pos[e.u],
                v: pos[e.v],
                j: e.j,
            })
            .collect();
        let field = vertices.iter().map(|&v| self.field[v]).collect();
        Self::with_field(vertices.len(), edges, field)
    }
}

/// `e^m / (e^m + e^{-m})` in the overflow-free form `1 / (1 + e^{-2m})`.
#[inline]
pub fn plus_probability(m: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * m).exp())
}

/// An assignment `V -> {-1, +1}`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig(Vec<i8>);

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|&x| if x > 0 { '+' } else { '-' }).collect();
        write!(f, "SpinConfig({s})")
    }
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(x) = spins.iter().find(|&&x| x != 1 && x != -1) {
            return Err(Error::InvalidInput(format!("spin value {x} is not ±1")));
        }
        Ok(Self(spins))
    }

    pub fn all_plus(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn all_minus(n: usize) -> Self {
        Self(vec![-1; n])
    }

    pub fn from_index(index: u64, n: usize) -> Self {
        Self((0..n).map(|v| if (index >> v) & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Enumeration index; panics above [`MAX_INDEXED_SITES`] sites.
    pub fn index(&self) -> u64 {
        assert!(self.0.len() <= MAX_INDEXED_SITES);
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0)
            .fold(0u64, |acc, (v, _)| acc | (1 << v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub(crate) fn spins_mut(&mut self) -> &mut [i8] {
        &mut self.0
    }

    pub fn get(&self, v: usize) -> i8 {
        self.0[v]
    }

    pub fn set(&mut self, v: usize, spin: i8) {
        debug_assert!(spin == 1 || spin == -1);
        self.0[v] = spin;
    }

    /// Global spin flip `-σ`.
    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|&x| -x).collect())
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&x| i64::from(x)).sum()
    }

    /// Coordinatewise order `σ <= τ`.
    pub fn leq(&self, other: &Self) -> Result<bool> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).all(|(a, b)| a <= b))
    }
}

/// One step of a recorded trajectory: the chosen site (or block anchor) and
/// every uniform draw the update consumed, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub t: u64,
    pub site: usize,
    pub draws: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn edge(u: usize, v: usize, j: f64) -> Edge {
        Edge { u, v, j }
    }

    #[test]
    fn weight_examples() {
        let empty = IsingModel::empty(4).unwrap();
        let s = SpinConfig::new(vec![1, -1, 1, 1]).unwrap();
        assert_eq!(empty.unnormalized_weight(&s).unwrap(), 1.0);

        let single = IsingModel::new(2, vec![edge(0, 1, 0.5)]).unwrap();
        let w = single.unnormalized_weight(&SpinConfig::all_plus(2)).unwrap();
        assert_abs_diff_eq!(w, 1.648_721_270_700_128, epsilon = 1e-12);

        let vertex = IsingModel::with_field(1, vec![], vec![0.3]).unwrap();
        let w = vertex.unnormalized_weight(&SpinConfig::all_plus(1)).unwrap();
        assert_abs_diff_eq!(w, 1.349_858_807_576_003, epsilon = 1e-12);
    }

    #[test]
    fn weight_dimension_mismatch() {
        let m = IsingModel::empty(3).unwrap();
        assert!(matches!(
            m.unnormalized_weight(&SpinConfig::all_plus(2)),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn local_field_examples() {
        let empty = IsingModel::empty(3).unwrap();
        assert_eq!(empty.local_field(&SpinConfig::all_plus(3), 1), 0.0);

        let one = IsingModel::new(2, vec![edge(0, 1, 1.0)]).unwrap();
        assert_eq!(one.local_field(&SpinConfig::all_plus(2), 0), 1.0);

        // v = 0 with neighbors 1 (+1, J = 0.7) and 2 (-1, J = 0.2), H_0 = 0.1
        let m = IsingModel::with_field(
            3,
            vec![edge(0, 1, 0.7), edge(2, 0, 0.2)],
            vec![0.1, 0.0, 0.0],
        )
        .unwrap();
        let s = SpinConfig::new(vec![-1, 1, -1]).unwrap();
        assert_abs_diff_eq!(m.local_field(&s, 0), 0.6, epsilon = 1e-15);
        let s2 = SpinConfig::new(vec![1, 1, -1]).unwrap();
        assert_eq!(m.local_field(&s, 0), m.local_field(&s2, 0));
        assert_eq!(m.local_field_index(s.index(), 0), m.local_field(&s, 0));
    }

    #[test]
    fn heat_bath_examples() {
        let empty = IsingModel::empty(2).unwrap();
        assert_eq!(empty.heat_bath_probability(&SpinConfig::all_plus(2), 0), 0.5);

        let one = IsingModel::new(2, vec![edge(0, 1, 1.0)]).unwrap();
        let p = one.heat_bath_probability(&SpinConfig::all_plus(2), 0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(p, e / (e + 1.0 / e), epsilon = 1e-15);
        assert_abs_diff_eq!(p, 0.880_797, epsilon = 1e-6);

        let s = SpinConfig::new(vec![-1, 1]).unwrap();
        let q = one.heat_bath_probability(&s.flipped(), 0) + one.heat_bath_probability(&s, 0);
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn heat_bath_extreme_fields_stay_finite() {
        assert_eq!(plus_probability(1e4), 1.0);
        assert_eq!(plus_probability(-1e4), 0.0);
    }

    #[test]
    fn sum_examples() {
        assert_eq!(SpinConfig::all_plus(5).sum(), 5);
        assert_eq!(SpinConfig::new(vec![1, -1, 1, -1]).unwrap().sum(), 0);
        assert_eq!(SpinConfig::new(vec![1, -1, -1]).unwrap().sum(), -1);
    }

    #[test]
    fn order_examples() {
        let a = SpinConfig::new(vec![1, -1]).unwrap();
        let b = SpinConfig::new(vec![-1, 1]).unwrap();
        assert!(a.leq(&a).unwrap());
        assert!(SpinConfig::all_minus(2).leq(&SpinConfig::all_plus(2)).unwrap());
        assert!(!a.leq(&b).unwrap());
        assert!(!b.leq(&a).unwrap());
        assert!(a.leq(&SpinConfig::all_plus(3)).is_err());
    }

    #[test]
    fn order_is_partial_order_on_small_cubes() {
        for n in 1..=4 {
            let all: Vec<_> = (0..1u64 << n).map(|i| SpinConfig::from_index(i, n)).collect();
            for a in &all {
                assert!(a.leq(a).unwrap());
                for b in &all {
                    if a.leq(b).unwrap() && b.leq(a).unwrap() {
                        assert_eq!(a, b);
                    }
                    for c in &all {
                        if a.leq(b).unwrap() && b.leq(c).unwrap() {
                            assert!(a.leq(c).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(IsingModel::new(2, vec![edge(0, 1, -0.1)]).is_err());
        assert!(IsingModel::new(2, vec![edge(0, 0, 0.1)]).is_err());
        assert!(IsingModel::new(2, vec![edge(0, 2, 0.1)]).is_err());
        assert!(IsingModel::new(2, vec![edge(0, 1, 0.1), edge(1, 0, 0.2)]).is_err());
        assert!(IsingModel::new(0, vec![]).is_err());
        assert!(SpinConfig::new(vec![1, 0]).is_err());
    }

    #[test]
    fn index_bijection() {
        for i in 0..32u64 {
            assert_eq!(SpinConfig::from_index(i, 5).index(), i);
        }
        // bit b set iff vertex b is +1
        assert_eq!(SpinConfig::new(vec![1, -1, 1]).unwrap().index(), 0b101);
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let m = IsingModel::new(3, vec![edge(0, 1, 0.5), edge(1, 2, 1.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: IsingModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.neighbors(1).len(), 2);
        let bad = s.replace("0.5", "-0.5");
        assert!(serde_json::from_str::<IsingModel>(&bad).is_err());
    }
}
