//! Independent reference solutions and error metrics: analytic OU and
//! double-well densities, a 1-D Fokker-Planck finite-difference solver, and
//! Monte-Carlo ensemble forecasts.

pub mod analytic;
pub mod ensemble;
pub mod fpe;
pub mod metrics;

pub use analytic::{doublewell_ps, ou_analytic, ou_moments, OuInitial};
pub use ensemble::{cloud_moment, ensemble_forecast, EnsembleForecast};
pub use fpe::{discrete_fluxes, fpe_solve_1d, FpeConfig};
pub use metrics::{error_metrics, ErrorReport, TimeError};
