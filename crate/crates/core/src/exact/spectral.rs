use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::kernel::TransitionMatrix;
use super::table::sum_of_spins_table;
use crate::error::{Error, Result};

/// Largest state space handled by the dense symmetric solver.
pub const DENSE_EIGEN_MAX_DIM: usize = 4096;

/// Eigenvalues closer than this to `λ₂` are counted in its eigenspace.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    /// Descending. Only `[1, λ₂]` when `partial`.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// Normalized to max-abs 1, oriented so that it correlates positively
    /// with the sum of spins.
    pub second_eigenfunction: Vec<f64>,
    /// Dimension of the `λ₂` eigenspace (1 when `partial`).
    pub multiplicity: usize,
    /// Power-iteration fallback: eigenvalues beyond `λ₂` were not computed.
    pub partial: bool,
}

impl SpectralData {
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn relaxation_time(&self) -> f64 {
        1.0 / self.gap
    }
}

/// Spectrum of a reversible kernel through `D^{1/2} P D^{-1/2}`.
///
/// In a degenerate `λ₂` eigenspace the returned eigenfunction is the
/// projection of the sum of spins onto that eigenspace when it is nonzero,
/// so the choice does not depend on the solver's basis.
pub fn spectral_data(p: &TransitionMatrix) -> Result<SpectralData> {
    let pi = p
        .stationary()
        .ok_or_else(|| Error::InvalidInput("spectral data needs the stationary law".into()))?;
    if !p.is_reversible() {
        return Err(Error::NotReversible {
            residual: p.balance_residual().unwrap_or(f64::INFINITY),
        });
    }
    if p.dim() == 1 {
        return Ok(SpectralData {
            eigenvalues: vec![1.0],
            gap: 1.0,
            second_eigenfunction: vec![0.0],
            multiplicity: 0,
            partial: false,
        });
    }
    if p.dim() > DENSE_EIGEN_MAX_DIM {
        return power_iteration(p, pi);
    }
    let dim = p.dim();
    let sqrt_pi: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..dim {
        for (y, pxy) in p.row(x) {
            if x == y {
                a[(x, x)] = pxy;
            } else if x < y {
                // sqrt(P(x,y) P(y,x)) is the symmetric form of sqrt(π_x/π_y) P(x,y)
                let v = (pxy * p.entry(y, x)).sqrt();
                a[(x, y)] = v;
                a[(y, x)] = v;
            }
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let lambda2 = eigenvalues[1];
    let space: Vec<usize> = order[1..]
        .iter()
        .copied()
        .take_while(|&i| (eig.eigenvalues[i] - lambda2).abs() <= DEGENERACY_TOLERANCE)
        .collect();

    let n = dim.trailing_zeros() as usize;
    let target: Option<DVector<f64>> = if dim.is_power_of_two() {
        let s = sum_of_spins_table(n);
        Some(DVector::from_iterator(
            dim,
            s.iter().zip(&sqrt_pi).map(|(a, b)| a * b),
        ))
    } else {
        None
    };
    let mut phi = DVector::<f64>::zeros(dim);
    if let Some(t) = &target {
        for &i in &space {
            let col = eig.eigenvectors.column(i);
            phi += col * col.dot(t);
        }
    }
    if phi.norm() < 1e-8 {
        phi = eig.eigenvectors.column(space[0]).into_owned();
    }
    let mut f: Vec<f64> = phi.iter().zip(&sqrt_pi).map(|(a, b)| a / b).collect();
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let corr: f64 = match &target {
        Some(t) => phi.dot(t),
        None => 0.0,
    };
    let sign = if corr < 0.0 || (corr == 0.0 && f[dim - 1] < 0.0) {
        -1.0
    } else {
        1.0
    };
    for x in &mut f {
        *x *= sign / scale;
    }
    Ok(SpectralData {
        gap: 1.0 - lambda2,
        eigenvalues,
        second_eigenfunction: f,
        multiplicity: space.len(),
        partial: false,
    })
}

const POWER_MAX_ITERS: usize = 200_000;
const POWER_TOL: f64 = 1e-13;

/// Top nontrivial eigenpair of the symmetrized kernel by power iteration
/// with the stationary direction deflated. Heat-bath kernels are positive
/// semidefinite, so the dominant remaining eigenvalue is `λ₂`.
fn power_iteration(p: &TransitionMatrix, pi: &[f64]) -> Result<SpectralData> {
    let dim = p.dim();
    let sqrt_pi: Vec<f64> = pi.iter().map(|x| x.sqrt()).collect();
    let n = dim.trailing_zeros() as usize;
    let s = sum_of_spins_table(n);
    let mut v: Vec<f64> = s.iter().zip(&sqrt_pi).map(|(a, b)| a * b + 1e-3 * b).collect();
    let deflate = |v: &mut Vec<f64>| {
        let c: f64 = v.iter().zip(&sqrt_pi).map(|(a, b)| a * b).sum();
        for (x, b) in v.iter_mut().zip(&sqrt_pi) {
            *x -= c * b;
        }
    };
    let normalize = |v: &mut Vec<f64>| {
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= nrm;
        }
    };
    deflate(&mut v);
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        // A v = D^{1/2} P D^{-1/2} v
        let g: Vec<f64> = v.iter().zip(&sqrt_pi).map(|(a, b)| a / b).collect();
        let pg = p.apply_right(&g);
        let mut w: Vec<f64> = pg.iter().zip(&sqrt_pi).map(|(a, b)| a * b).collect();
        deflate(&mut w);
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        normalize(&mut w);
        v = w;
        if (next - lambda).abs() < POWER_TOL {
            lambda = next;
            break;
        }
        lambda = next;
    }
    let mut f: Vec<f64> = v.iter().zip(&sqrt_pi).map(|(a, b)| a / b).collect();
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let corr: f64 = f.iter().zip(&s).zip(pi).map(|((a, b), c)| a * b * c).sum();
    let sign = if corr < 0.0 { -1.0 } else { 1.0 };
    for x in &mut f {
        *x *= sign / scale;
    }
    Ok(SpectralData {
        eigenvalues: vec![1.0, lambda],
        gap: 1.0 - lambda,
        second_eigenfunction: f,
        multiplicity: 1,
        partial: true,
    })
}

/// Whether `f` is coordinatewise nondecreasing over `{±1}^n`.
pub fn is_increasing(f: &[f64], tolerance: f64) -> bool {
    let dim = f.len();
    let n = dim.trailing_zeros() as usize;
    (0..dim).all(|x| {
        (0..n)
            .filter(|v| x & (1 << v) == 0)
            .all(|v| f[x | (1 << v)] >= f[x] - tolerance)
    })
}
