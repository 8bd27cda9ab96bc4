//! Double-double evaluation of the spectral gap and mixing time.
//!
//! On strongly coupled instances `t_mix` and `1/gap` reach `1e10` while the
//! quantities compared against each other differ by O(1) steps, which is
//! below f64 resolution. Here the kernel is built from f64 Gibbs weights `w`
//! as `P(x, x^v) = w(x^v) / (n (w(x) + w(x^v)))`, which is exactly reversible
//! with respect to `w`, and everything downstream runs in ~106-bit arithmetic.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::spin::IsingModel;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const LN_2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let s = Dd::new(self.hi.sqrt());
        // one Newton step doubles the 53 correct bits
        s + (self - s * s) / (s * 2.0)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, o: Dd) {
        *self = *self + o;
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        self * Dd::new(o)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        let r = r - o * q2;
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&o.lo),
            ord => ord,
        }
    }
}

/// Largest site count for the double-double chain (dense `2^n` squares).
pub const PRECISE_MAX_SITES: usize = 6;

/// Glauber kernel in double-double, stored as per-site flip probabilities.
#[derive(Debug, Clone)]
pub struct PreciseChain {
    n: usize,
    dim: usize,
    pi: Vec<Dd>,
    /// `flip[x * n + v] = P(x, x ^ (1 << v))`.
    flip: Vec<Dd>,
    stay: Vec<Dd>,
}

impl PreciseChain {
    pub fn new(model: &IsingModel) -> Result<Self> {
        let n = model.n();
        if n > PRECISE_MAX_SITES {
            return Err(Error::Capacity {
                what: "extended-precision chain sites",
                size: n,
                limit: PRECISE_MAX_SITES,
            });
        }
        let dim = 1usize << n;
        let energies: Vec<f64> = (0..dim as u64).map(|i| model.log_weight_index(i)).collect();
        let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<Dd> = energies.iter().map(|e| Dd::new((e - max).exp())).collect();
        let z = w.iter().fold(Dd::ZERO, |a, &b| a + b);
        let pi = w.iter().map(|&x| x / z).collect();
        let inv_n = Dd::ONE / Dd::new(n as f64);
        let mut flip = vec![Dd::ZERO; dim * n];
        let mut stay = vec![Dd::ZERO; dim];
        for x in 0..dim {
            let mut keep = Dd::ZERO;
            for v in 0..n {
                let y = x ^ (1 << v);
                let denom = w[x] + w[y];
                flip[x * n + v] = w[y] / denom * inv_n;
                keep += w[x] / denom;
            }
            stay[x] = keep * inv_n;
        }
        Ok(Self {
            n,
            dim,
            pi,
            flip,
            stay,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn tv(&self, mu: &[Dd]) -> Dd {
        let s = mu
            .iter()
            .zip(&self.pi)
            .fold(Dd::ZERO, |acc, (&a, &b)| acc + (a - b).abs());
        s * 0.5
    }

    fn step(&self, mu: &[Dd]) -> Vec<Dd> {
        let mut out: Vec<Dd> = mu.iter().zip(&self.stay).map(|(&m, &s)| m * s).collect();
        for x in 0..self.dim {
            for v in 0..self.n {
                let y = x ^ (1 << v);
                out[y] += mu[x] * self.flip[x * self.n + v];
            }
        }
        out
    }

    fn dense(&self) -> Vec<Dd> {
        let d = self.dim;
        let mut m = vec![Dd::ZERO; d * d];
        for x in 0..d {
            m[x * d + x] = self.stay[x];
            for v in 0..self.n {
                m[x * d + (x ^ (1 << v))] = self.flip[x * self.n + v];
            }
        }
        m
    }

    /// `1 - λ₂`, from the Laplacian `I - D^{1/2} P D^{-1/2}` whose entries
    /// are formed without cancellation.
    pub fn gap(&self) -> Dd {
        let d = self.dim;
        if d == 2 {
            // the only nonzero Laplacian eigenvalue is its trace
            return self.flip[0] + self.flip[1];
        }
        let mut l = vec![Dd::ZERO; d * d];
        for x in 0..d {
            let mut out = Dd::ZERO;
            for v in 0..self.n {
                let y = x ^ (1 << v);
                let pxy = self.flip[x * self.n + v];
                out += pxy;
                if x < y {
                    let sym = -(pxy * self.flip[y * self.n + v]).sqrt();
                    l[x * d + y] = sym;
                    l[y * d + x] = sym;
                }
            }
            l[x * d + x] = out;
        }
        let mut ev = jacobi_eigenvalues(&mut l, d);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        ev[1]
    }

    /// Least `t` with `TV(δ_start P^t, π) <= threshold`.
    pub fn mixing_time(&self, start: usize, threshold: f64) -> Result<u64> {
        let thr = Dd::new(threshold);
        let mut mu = vec![Dd::ZERO; self.dim];
        mu[start] = Dd::ONE;
        if self.tv(&mu) <= thr {
            return Ok(0);
        }
        let mut t = 0u64;
        while t < 512 {
            mu = self.step(&mu);
            t += 1;
            if self.tv(&mu) <= thr {
                return Ok(t);
            }
        }
        let d = self.dim;
        let row = |m: &[Dd], v: &[Dd]| -> Vec<Dd> {
            let mut out = vec![Dd::ZERO; d];
            for (x, &vx) in v.iter().enumerate() {
                if vx == Dd::ZERO {
                    continue;
                }
                for y in 0..d {
                    out[y] += vx * m[x * d + y];
                }
            }
            out
        };
        let square = |m: &[Dd]| -> Vec<Dd> {
            let mut out = vec![Dd::ZERO; d * d];
            for x in 0..d {
                for k in 0..d {
                    let a = m[x * d + k];
                    if a == Dd::ZERO {
                        continue;
                    }
                    for y in 0..d {
                        out[x * d + y] += a * m[k * d + y];
                    }
                }
            }
            out
        };
        let mut powers = vec![self.dense()];
        loop {
            let last = powers.last().expect("nonempty");
            if self.tv(&row(last, &mu)) <= thr {
                break;
            }
            if powers.len() >= 62 {
                return Err(Error::Horizon {
                    horizon: t + (1u64 << (powers.len() - 1)),
                });
            }
            let sq = square(last);
            powers.push(sq);
        }
        for j in (0..powers.len() - 1).rev() {
            let cand = row(&powers[j], &mu);
            if self.tv(&cand) > thr {
                mu = cand;
                t += 1 << j;
            }
        }
        Ok(t + 1)
    }
}

/// Eigenvalues of a symmetric row-major matrix by cyclic Jacobi rotations.
/// The matrix is overwritten.
fn jacobi_eigenvalues(a: &mut [Dd], d: usize) -> Vec<Dd> {
    let frob = a.iter().fold(Dd::ZERO, |s, &x| s + x * x).sqrt();
    let eps = frob * 1e-32;
    for _sweep in 0..100 {
        let mut off = Dd::ZERO;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q].abs();
            }
        }
        if off <= eps {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= eps * 1e-3 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (apq * 2.0);
                let root = (theta * theta + Dd::ONE).sqrt();
                let t = if theta.hi() >= 0.0 {
                    Dd::ONE / (theta + root)
                } else {
                    -(Dd::ONE / (root - theta))
                };
                let c = Dd::ONE / (t * t + Dd::ONE).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = Dd::ZERO;
                a[q * d + p] = Dd::ZERO;
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::kernel::{exact_mixing_time, glauber_transition_matrix};
    use crate::exact::spectral::spectral_data;
    use crate::exact::Limits;
    use crate::spin::{Edge, SpinConfig};

    #[test]
    fn arithmetic_keeps_low_word() {
        let third = Dd::ONE / Dd::new(3.0);
        let r = third * Dd::new(3.0) - Dd::ONE;
        assert!(r.to_f64().abs() < 1e-31);
        let two = Dd::new(2.0).sqrt();
        assert!((two * two - Dd::new(2.0)).to_f64().abs() < 1e-31);
        let x = Dd::new(1.0) + Dd::new(1e-20);
        assert_eq!((x - Dd::ONE).to_f64(), 1e-20);
        // e^{ln 2} = 2 through the Taylor series, summed in double-double
        let (mut term, mut sum) = (Dd::ONE, Dd::ONE);
        for i in 1..40 {
            term = term * Dd::LN_2 / Dd::new(i as f64);
            sum += term;
        }
        assert!((sum - Dd::new(2.0)).to_f64().abs() < 1e-30);
        assert!(Dd::new(-2.0).abs() == Dd::new(2.0));
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] ⊕ [[5]]
        let mut a = vec![
            Dd::new(2.0), Dd::new(1.0), Dd::ZERO,
            Dd::new(1.0), Dd::new(2.0), Dd::ZERO,
            Dd::ZERO, Dd::ZERO, Dd::new(5.0),
        ];
        let mut ev: Vec<f64> = jacobi_eigenvalues(&mut a, 3).iter().map(|x| x.to_f64()).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-15);
        assert!((ev[1] - 3.0).abs() < 1e-15);
        assert!((ev[2] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_f64_engine_on_moderate_chains() {
        let m = IsingModel::with_field(
            4,
            vec![Edge { u: 0, v: 1, j: 0.8 }, Edge { u: 1, v: 2, j: 0.5 }, Edge { u: 2, v: 3, j: 1.0 }],
            vec![0.1, 0.0, 0.2, 0.0],
        )
        .unwrap();
        let lim = Limits::default();
        let chain = PreciseChain::new(&m).unwrap();
        let gap64 = spectral_data(&glauber_transition_matrix(&m, &lim).unwrap()).unwrap().gap;
        assert!((chain.gap().to_f64() - gap64).abs() < 1e-12);
        for start in [0usize, 15, 6] {
            let t64 = exact_mixing_time(&m, &SpinConfig::from_index(start as u64, 4), 0.25, &lim).unwrap();
            assert_eq!(chain.mixing_time(start, 0.25).unwrap(), t64);
        }
    }

    #[test]
    fn independent_sites() {
        for n in 1..=5 {
            let chain = PreciseChain::new(&IsingModel::empty(n).unwrap()).unwrap();
            let expected = if n == 1 { 1.0 } else { 1.0 / n as f64 };
            assert!((chain.gap().to_f64() - expected).abs() < 1e-28);
        }
    }

    #[test]
    fn strongly_coupled_gap_is_resolved() {
        // K4 with J = 2: gap around 1e-6 and t_mix^+ around ln 2 / gap
        let mut edges = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                edges.push(Edge { u, v, j: 2.0 });
            }
        }
        let m = IsingModel::new(4, edges).unwrap();
        let chain = PreciseChain::new(&m).unwrap();
        let gap = chain.gap().to_f64();
        assert!(gap > 0.0 && gap < 1e-4);
        let t = chain.mixing_time(15, 0.25).unwrap() as f64;
        assert!(t >= std::f64::consts::LN_2 * (1.0 / gap - 1.0));
        assert_eq!(chain.mixing_time(0, 0.25).unwrap() as f64, t);
    }
}
