//! Data-driven probability density forecasting for ergodic stochastic
//! dynamical systems.
//!
//! The pipeline: simulate (or load) stationary snapshot pairs of an SDE,
//! project the stochastic Koopman operator onto a finite observable
//! dictionary with EDMD in the invariant-measure-weighted space, convert the
//! Koopman eigenvalues to generator decay rates, and expand the evolving
//! probability density in the eigenfunction basis with importance-sampled
//! initial coefficients. A diffusion-maps forecaster serves as the baseline
//! for comparison, and independent references (analytic densities, a 1-D
//! Fokker-Planck solver, particle ensembles) close the loop.

pub mod density;
pub mod dfmap;
pub mod dict;
pub mod edmd;
pub mod error;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod sde;

pub use error::{Error, Result};
