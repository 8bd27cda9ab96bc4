//! Stochastic domination over the Boolean lattice `{±1}^n`.
//!
//! `p` dominates `q` when `p(U) >= q(U)` for every increasing event `U`.
//! Increasing events are enumerated exactly for `n <= 5` (7581 of them at
//! `n = 5`); above that only random increasing events are tested and the
//! answer is not a certificate.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::table::DistributionTable;
use super::Limits;
use crate::error::{Error, Result};

/// Hard ceiling for exact up-set enumeration (Dedekind growth).
pub const MAX_UPSET_SITES: usize = 5;

pub const DOMINANCE_TOLERANCE: f64 = 1e-12;

/// Every up-set of `{±1}^n` as a bitmask over configuration indices.
pub fn upsets(n: usize) -> Result<&'static [u64]> {
    static CACHE: [OnceLock<Vec<u64>>; MAX_UPSET_SITES + 1] =
        [const { OnceLock::new() }; MAX_UPSET_SITES + 1];
    if n > MAX_UPSET_SITES {
        return Err(Error::Capacity {
            what: "up-set enumeration sites",
            size: n,
            limit: MAX_UPSET_SITES,
        });
    }
    Ok(CACHE[n].get_or_init(|| build_upsets(n)))
}

fn build_upsets(n: usize) -> Vec<u64> {
    if n == 0 {
        return vec![0, 1];
    }
    // An up-set splits along the top coordinate into A (spin -1) and
    // B (spin +1), both up-sets of the lower cube, with A ⊆ B.
    let lower = upsets(n - 1).expect("n - 1 within the limit");
    let half = 1u32 << (n - 1);
    let mut out = Vec::new();
    for &a in lower {
        for &b in lower {
            if a & !b == 0 {
                out.push(a | (b << half));
            }
        }
    }
    out
}

fn mass(p: &[f64], set: u64) -> f64 {
    let mut total = 0.0;
    let mut bits = set;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        total += p[i];
        bits &= bits - 1;
    }
    total
}

fn same_sites(p: &DistributionTable, q: &DistributionTable) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::Dimension {
            expected: p.n(),
            got: q.n(),
        });
    }
    Ok(())
}

/// Smallest `p(U) - q(U)` over all increasing events.
pub fn dominance_margin(p: &DistributionTable, q: &DistributionTable, limits: &Limits) -> Result<f64> {
    same_sites(p, q)?;
    let limit = limits.upsets().min(MAX_UPSET_SITES);
    if p.n() > limit {
        return Err(Error::Capacity {
            what: "up-set enumeration sites",
            size: p.n(),
            limit,
        });
    }
    let sets = upsets(p.n())?;
    Ok(sets
        .iter()
        .map(|&u| mass(p.probs(), u) - mass(q.probs(), u))
        .fold(f64::INFINITY, f64::min))
}

/// `true` iff `p` stochastically dominates `q`, within [`DOMINANCE_TOLERANCE`].
pub fn stochastically_dominates(
    p: &DistributionTable,
    q: &DistributionTable,
    limits: &Limits,
) -> Result<bool> {
    Ok(dominance_margin(p, q, limits)? >= -DOMINANCE_TOLERANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledDominance {
    pub holds: bool,
    pub worst_margin: f64,
    pub events: usize,
    /// Always false: random events cannot certify domination.
    pub certificate: bool,
}

/// Domination tested on `events` random increasing events (up-closures of
/// random point sets). Evidence only.
pub fn stochastically_dominates_sampled<R: Rng + ?Sized>(
    p: &DistributionTable,
    q: &DistributionTable,
    events: usize,
    limits: &Limits,
    rng: &mut R,
) -> Result<SampledDominance> {
    same_sites(p, q)?;
    if p.n() > limits.enumeration() {
        return Err(Error::Capacity {
            what: "sampled dominance sites",
            size: p.n(),
            limit: limits.enumeration(),
        });
    }
    let dim = p.dim();
    let n = p.n();
    let mut worst = f64::INFINITY;
    let mut member = vec![false; dim];
    for _ in 0..events {
        let density: f64 = rng.random::<f64>() * 0.2;
        for (i, m) in member.iter_mut().enumerate() {
            *m = i == dim - 1 || rng.random::<f64>() < density;
        }
        for x in 0..dim {
            if member[x] {
                for v in 0..n {
                    member[x | (1 << v)] = true;
                }
            }
        }
        let diff: f64 = (0..dim)
            .filter(|&i| member[i])
            .map(|i| p.probs()[i] - q.probs()[i])
            .sum();
        worst = worst.min(diff);
    }
    Ok(SampledDominance {
        holds: worst >= -DOMINANCE_TOLERANCE,
        worst_margin: worst,
        events,
        certificate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::table::gibbs_distribution;
    use crate::spin::{Edge, IsingModel};
    use rand::SeedableRng;

    /// Independent count: monotone Boolean functions by brute force over all
    /// subsets, checking closure directly.
    fn brute_force_upsets(n: usize) -> usize {
        let dim = 1usize << n;
        (0u64..1 << dim)
            .filter(|&s| {
                (0..dim).all(|x| {
                    s >> x & 1 == 0 || (0..n).all(|v| s >> (x | (1 << v)) & 1 == 1)
                })
            })
            .count()
    }

    #[test]
    fn dedekind_counts() {
        let expected = [2usize, 3, 6, 20, 168, 7581];
        for n in 0..=5 {
            assert_eq!(upsets(n).unwrap().len(), expected[n]);
        }
        for n in 0..=3 {
            assert_eq!(upsets(n).unwrap().len(), brute_force_upsets(n));
        }
        assert!(upsets(6).is_err());
    }

    #[test]
    fn every_enumerated_set_is_increasing() {
        let n = 4;
        for &s in upsets(n).unwrap() {
            for x in 0..16usize {
                if s >> x & 1 == 1 {
                    for v in 0..n {
                        assert_eq!(s >> (x | (1 << v)) & 1, 1);
                    }
                }
            }
        }
    }

    #[test]
    fn domination_examples() {
        let lim = Limits::default();
        let m = IsingModel::new(3, vec![Edge { u: 0, v: 1, j: 0.5 }]).unwrap();
        let g = gibbs_distribution(&m, &lim).unwrap();
        assert!(stochastically_dominates(&g, &g, &lim).unwrap());
        let top = DistributionTable::point_mass(3, 7);
        let bottom = DistributionTable::point_mass(3, 0);
        assert!(stochastically_dominates(&top, &g, &lim).unwrap());
        assert!(!stochastically_dominates(&g, &top, &lim).unwrap());
        assert!(stochastically_dominates(&g, &bottom, &lim).unwrap());
        // incomparable point masses
        let a = DistributionTable::point_mass(3, 0b001);
        let b = DistributionTable::point_mass(3, 0b010);
        assert!(!stochastically_dominates(&a, &b, &lim).unwrap());
        assert!(!stochastically_dominates(&b, &a, &lim).unwrap());
    }

    #[test]
    fn sampled_dominance_is_not_a_certificate() {
        let lim = Limits::default();
        let top = DistributionTable::point_mass(7, 127);
        let uni = DistributionTable::uniform(7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r = stochastically_dominates_sampled(&top, &uni, 200, &lim, &mut rng).unwrap();
        assert!(r.holds && !r.certificate);
        let r = stochastically_dominates_sampled(&uni, &top, 200, &lim, &mut rng).unwrap();
        assert!(!r.holds);
        assert!(stochastically_dominates(&top, &uni, &lim).is_err());
    }
}
