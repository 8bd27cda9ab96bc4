//! Exact and Monte-Carlo machinery for lower bounds on the mixing time of
//! heat-bath Glauber dynamics for ferromagnetic Ising models.
//!
//! * [`spin`]: models, configurations and single-site primitives.
//! * [`exact`]: enumeration of `{±1}^n`: Gibbs tables, kernels, spectra,
//!   TV curves, stochastic domination.
//! * [`dynamics`]: seeded simulation of the plain, block and projected
//!   chains and their monotone coupling.
//! * [`checks`]: one checker per inequality and the end-to-end lower-bound
//!   pipeline.
//! * [`experiment`]: model files, generators, configs, reports and plot data.

pub mod checks;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod experiment;
mod par;
pub mod spin;

pub use error::{Error, Result};
pub use exact::Limits;
pub use spin::{Edge, IsingModel, SpinConfig, UpdateRecord};
