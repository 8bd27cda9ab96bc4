//! Brute-force oracles written against the model definition only.

#![allow(dead_code)]

use mixlab_core::{Edge, IsingModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn spin(x: usize, v: usize) -> f64 {
    if (x >> v) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Erdős–Rényi graph with couplings uniform on `[j_lo, j_hi]`.
pub fn random_model(r: &mut ChaCha8Rng, n: usize, p: f64, j_lo: f64, j_hi: f64, field: Option<f64>) -> IsingModel {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if r.random::<f64>() < p {
                edges.push(Edge { u, v, j: r.random_range(j_lo..=j_hi) });
            }
        }
    }
    let h = match field {
        Some(a) => (0..n).map(|_| r.random_range(-a..=a)).collect(),
        None => vec![0.0; n],
    };
    IsingModel::with_field(n, edges, h).unwrap()
}

pub fn energy(m: &IsingModel, x: usize) -> f64 {
    let mut e: f64 = m.edges().iter().map(|ed| ed.j * spin(x, ed.u) * spin(x, ed.v)).sum();
    e += m.field().iter().enumerate().map(|(v, h)| h * spin(x, v)).sum::<f64>();
    e
}

pub fn gibbs(m: &IsingModel) -> Vec<f64> {
    let w: Vec<f64> = (0..1usize << m.n()).map(|x| energy(m, x)).collect();
    let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = w.iter().map(|e| (e - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

pub fn expect(pi: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    pi.iter().enumerate().map(|(x, p)| p * f(x)).sum()
}

fn local_field(m: &IsingModel, x: usize, v: usize) -> f64 {
    let mut s = m.field()[v];
    for ed in m.edges() {
        if ed.u == v {
            s += ed.j * spin(x, ed.v);
        } else if ed.v == v {
            s += ed.j * spin(x, ed.u);
        }
    }
    s
}

/// One heat-bath update at `v` applied to a law.
pub fn update_site(m: &IsingModel, mu: &[f64], v: usize) -> Vec<f64> {
    let mut out = vec![0.0; mu.len()];
    for (x, &p) in mu.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let plus = 1.0 / (1.0 + (-2.0 * local_field(m, x, v)).exp());
        out[x | (1 << v)] += p * plus;
        out[x & !(1 << v)] += p * (1.0 - plus);
    }
    out
}

/// One step of random-site Glauber dynamics applied to a law.
pub fn glauber_step(m: &IsingModel, mu: &[f64]) -> Vec<f64> {
    let n = m.n();
    let mut out = vec![0.0; mu.len()];
    for v in 0..n {
        for (o, u) in out.iter_mut().zip(update_site(m, mu, v)) {
            *o += u / n as f64;
        }
    }
    out
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn point_mass(dim: usize, x: usize) -> Vec<f64> {
    let mut mu = vec![0.0; dim];
    mu[x] = 1.0;
    mu
}

/// `TV(δ_+ P^t, π)` for `t = 0..=horizon`.
pub fn tv_from_plus(m: &IsingModel, horizon: u64) -> Vec<f64> {
    let n = m.n();
    let pi = gibbs(m);
    let plus: Vec<f64> = (0..pi.len())
        .flat_map(|x| (0..n).map(move |v| (x, v)))
        .map(|(x, v)| 1.0 / (1.0 + (-2.0 * local_field(m, x, v)).exp()))
        .collect();
    let mut mu = point_mass(pi.len(), pi.len() - 1);
    let mut out = vec![tv(&mu, &pi)];
    for _ in 0..horizon {
        let mut next = vec![0.0; mu.len()];
        for (x, &p) in mu.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let w = p / n as f64;
            for v in 0..n {
                let q = plus[x * n + v];
                next[x | (1 << v)] += w * q;
                next[x & !(1 << v)] += w * (1.0 - q);
            }
        }
        mu = next;
        out.push(tv(&mu, &pi));
    }
    out
}

pub fn binomial_half(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; row.len() + 1];
        for (i, p) in row.iter().enumerate() {
            next[i] += 0.5 * p;
            next[i + 1] += 0.5 * p;
        }
        row = next;
    }
    row
}

/// Exact `t_mix^+` of Glauber dynamics on `n` free spins. From all-plus the
/// law is exchangeable, so its distance to uniform is that of the count of
/// plus spins: the never-updated sites plus a fair binomial of the rest.
pub fn free_spins_mixing_time(n: usize, threshold: f64) -> u64 {
    let target = binomial_half(n);
    let binoms: Vec<Vec<f64>> = (0..=n).map(binomial_half).collect();
    // untouched[u] = P(u sites not yet updated)
    let mut untouched = vec![0.0; n + 1];
    untouched[n] = 1.0;
    let mut t = 0;
    loop {
        let mut law = vec![0.0; n + 1];
        for (u, &pu) in untouched.iter().enumerate() {
            if pu == 0.0 {
                continue;
            }
            for (b, pb) in binoms[n - u].iter().enumerate() {
                law[u + b] += pu * pb;
            }
        }
        if tv(&law, &target) <= threshold {
            return t;
        }
        let mut next = vec![0.0; n + 1];
        for (u, &pu) in untouched.iter().enumerate() {
            let hit = u as f64 / n as f64;
            next[u] += pu * (1.0 - hit);
            if u > 0 {
                next[u - 1] += pu * hit;
            }
        }
        untouched = next;
        t += 1;
    }
}

pub fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &(a, b) in edges {
            for (p, q) in [(a, b), (b, a)] {
                if p == x && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Every connected labelled graph on `n` vertices.
pub fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
    (0..1usize << pairs.len())
        .map(|mask| pairs.iter().enumerate().filter(|(i, _)| (mask >> i) & 1 == 1).map(|(_, &e)| e).collect::<Vec<_>>())
        .filter(|e| connected(n, e))
        .collect()
}
