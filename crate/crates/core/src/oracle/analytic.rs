//! Closed-form reference densities: the OU transition density for the
//! benchmark instance (lambda = 1, beta = sqrt(2)) and the analytic
//! double-well stationary density.

use crate::density::{double_well_potential, DensityField, Grid, Producer};
use crate::error::{Error, Result};

/// Initial condition for the OU closed form.
#[derive(Debug, Clone, Copy)]
pub enum OuInitial {
    /// Deterministic start; only valid for t > 0.
    Point(f64),
    /// Gaussian start N(mean, var).
    Gaussian { mean: f64, var: f64 },
}

/// Exact OU density at time t on a grid: mean m(t) = m0 e^{-t} and variance
/// v^2(t) = v0^2 e^{-2t} + 1 - e^{-2t}.
pub fn ou_analytic(p0: OuInitial, t: f64, grid: &Grid) -> Result<DensityField> {
    if grid.dim() != 1 {
        return Err(Error::input("the OU reference is 1-D"));
    }
    if !(t >= 0.0) {
        return Err(Error::input("time must be nonnegative"));
    }
    let (m0, v0) = match p0 {
        OuInitial::Point(x0) => {
            if t == 0.0 {
                return Err(Error::input(
                    "a point initial condition has no grid-representable density at t = 0",
                ));
            }
            (x0, 0.0)
        }
        OuInitial::Gaussian { mean, var } => {
            if !(var > 0.0) {
                return Err(Error::input("initial variance must be positive"));
            }
            (mean, var)
        }
    };
    let decay = (-t).exp();
    let mean = m0 * decay;
    let var = v0 * decay * decay + 1.0 - decay * decay;
    let n = grid.n_points();
    let mut vals = vec![0.0; n];
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    for (i, v) in vals.iter_mut().enumerate() {
        let x = grid.coord(0, i);
        *v = norm * (-(x - mean).powi(2) / (2.0 * var)).exp();
    }
    DensityField::new(grid.clone(), vec![t], vec![vals], Producer::Analytic)
}

/// Mean and variance of the OU closed form (exposed for moment references).
pub fn ou_moments(p0: OuInitial, t: f64) -> (f64, f64) {
    let (m0, v0) = match p0 {
        OuInitial::Point(x0) => (x0, 0.0),
        OuInitial::Gaussian { mean, var } => (mean, var),
    };
    let decay = (-t).exp();
    (m0 * decay, v0 * decay * decay + 1.0 - decay * decay)
}

/// Analytic double-well stationary density
/// p_s ~ exp(-(2/sigma^2)(x^4 + x^3/3 - 5x^2/2)), normalized by trapezoid
/// quadrature over the grid. Returns a coverage warning when the boundary
/// density exceeds 1e-6 of the peak.
pub fn doublewell_ps(grid: &Grid, sigma: f64) -> Result<(DensityField, Option<String>)> {
    if grid.dim() != 1 {
        return Err(Error::input("the double-well density is 1-D"));
    }
    if !(sigma > 0.0) {
        return Err(Error::input("sigma must be positive"));
    }
    let beta = 2.0 / (sigma * sigma);
    let n = grid.n_points();
    let mut vals: Vec<f64> = (0..n)
        .map(|i| (-beta * double_well_potential(grid.coord(0, i))).exp())
        .collect();
    let mass = grid.integrate(&vals);
    if !(mass > 0.0) {
        return Err(Error::Numerical("double-well density underflowed on the grid".into()));
    }
    for v in vals.iter_mut() {
        *v /= mass;
    }
    let peak = vals.iter().cloned().fold(0.0f64, f64::max);
    let edge = vals[0].max(vals[n - 1]);
    let warning = if edge > 1e-6 * peak {
        Some(format!(
            "grid may be too narrow: boundary density {edge:.3e} exceeds 1e-6 of the peak {peak:.3e}"
        ))
    } else {
        None
    };
    let field = DensityField::new(grid.clone(), vec![0.0], vec![vals], Producer::Analytic)?;
    Ok((field, warning))
}
