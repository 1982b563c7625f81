//! Dynamic probability density decomposition: stationary density handling,
//! importance-sampled coefficients, density fields, and moment forecasts.

pub mod forecast;
pub mod grid;
pub mod stationary;

pub use forecast::{
    coefficients, expectation, forecast_density, forecast_density_multi, project_observable,
    raw_moments, ForecastOptions, ForecastReport, MomentRow, MomentSeries, SpectralForecastModel,
};
pub use grid::{DensityField, Grid, GridDim, Producer};
pub use stationary::{
    double_well_potential, kde_fit, BandwidthRule, GaussianSpec, InitialDensity, KdeDensity,
    StationaryDensity, PS_FLOOR,
};
