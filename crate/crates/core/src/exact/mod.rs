//! Exact computation by enumerating `{±1}^n`.

pub mod components;
pub mod kernel;
pub mod order;
pub mod precise;
pub mod spectral;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use components::{ComponentData, ComponentSummary};
pub use kernel::{
    dirichlet_form, exact_mixing_time, exact_tv_curve, glauber_transition_matrix, mixing_time,
    single_site_update, SiteUpdate, TransitionMatrix, REVERSIBILITY_TOLERANCE,
};
pub use order::{
    dominance_margin, stochastically_dominates, stochastically_dominates_sampled, upsets,
    SampledDominance,
};
pub use precise::{Dd, PreciseChain, PRECISE_MAX_SITES};
pub use spectral::{is_increasing, spectral_data, SpectralData};
pub use table::{
    conditional_magnetization, covariance_sum, ghs_estimate, ghs_second_derivative,
    gibbs_distribution, magnetizations, moments, project_distribution, sum_of_spins_table,
    tv_distance, DistributionTable, GhsEstimate, Moments,
};

pub const DEFAULT_ENUMERATION_LIMIT: usize = 12;
pub const MAX_ENUMERATION_LIMIT: usize = 20;
pub const DEFAULT_BLOCK_LIMIT: usize = 20;

/// Size ceilings for enumeration. Exceeding one is a capacity error, never
/// a silent approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    enumeration: usize,
    upsets: usize,
    block: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            enumeration: DEFAULT_ENUMERATION_LIMIT,
            upsets: order::MAX_UPSET_SITES,
            block: DEFAULT_BLOCK_LIMIT,
        }
    }
}

impl Limits {
    /// Sites for tables, kernels and conditional enumerations.
    pub fn enumeration(&self) -> usize {
        self.enumeration
    }

    /// Sites for exact up-set enumeration.
    pub fn upsets(&self) -> usize {
        self.upsets
    }

    /// Sites in an exactly resampled block `{v} ∪ F^c`.
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn with_enumeration(n: usize) -> Result<Self> {
        Self::default().set_enumeration(n)
    }

    pub fn set_enumeration(mut self, n: usize) -> Result<Self> {
        if n > MAX_ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                what: "enumeration limit",
                size: n,
                limit: MAX_ENUMERATION_LIMIT,
            });
        }
        self.enumeration = n;
        Ok(self)
    }

    pub fn set_block(mut self, n: usize) -> Result<Self> {
        if n > MAX_ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                what: "block limit",
                size: n,
                limit: MAX_ENUMERATION_LIMIT,
            });
        }
        self.block = n;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits_are_capped() {
        assert_eq!(Limits::default().enumeration(), 12);
        assert_eq!(Limits::with_enumeration(20).unwrap().enumeration(), 20);
        assert!(Limits::with_enumeration(21).is_err());
        assert!(Limits::default().set_block(25).is_err());
    }
}
