//! Monte-Carlo ensemble forecast: propagate particles sampled from the
//! initial density and density-estimate the terminal cloud.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{kde_fit, BandwidthRule, DensityField, Grid, InitialDensity, Producer};
use crate::error::{Error, Result};
use crate::sde::{simulate_trajectory, SdeModel, SimConfig};

#[derive(Debug, Clone)]
pub struct EnsembleForecast {
    /// Terminal particle cloud, d x n_particles.
    pub cloud: Mat<f64>,
    /// KDE of the terminal cloud on the requested grid (1-D/2-D only).
    pub field: Option<DensityField>,
    pub t: f64,
}

/// Simulates `n_particles` independent paths from p0 up to time t (steps of
/// `sim_dt`) and, when a grid is given, returns a Silverman-KDE density of
/// the terminal cloud. Three-dimensional clouds are returned raw.
pub fn ensemble_forecast(
    model: &SdeModel,
    p0: &InitialDensity,
    n_particles: usize,
    t: f64,
    grid: Option<&Grid>,
    seed: u64,
    sim_dt: f64,
) -> Result<EnsembleForecast> {
    if n_particles == 0 {
        return Err(Error::input("need at least one particle"));
    }
    if !(t >= 0.0) {
        return Err(Error::input("time must be nonnegative"));
    }
    if !p0.is_sampleable() {
        return Err(Error::input(
            "ensemble forecasts need a sampleable initial density (gaussian or mixture)",
        ));
    }
    if let Some(g) = grid {
        if g.dim() != model.dim_state {
            return Err(Error::input("grid dimension does not match the model"));
        }
        if model.dim_state > 2 {
            return Err(Error::input(
                "terminal-cloud density grids are supported for 1-D and 2-D models; 3-D clouds are returned raw",
            ));
        }
    }
    let n_steps = (t / sim_dt).round() as usize;
    let d = model.dim_state;
    let finals: Vec<Result<Vec<f64>>> = (0..n_particles)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ idx as u64);
            let x0 = p0.sample(&mut rng)?;
            if x0.len() != d {
                return Err(Error::input("initial density dimension does not match the model"));
            }
            let cfg = SimConfig::new(sim_dt, n_steps, 0, seed ^ idx as u64);
            let states = simulate_trajectory(model, &x0, &cfg).map_err(|e| match e {
                Error::SimulationDiverged { step } => Error::Numerical(format!(
                    "particle {idx} diverged at step {step}"
                )),
                other => other,
            })?;
            Ok(states.last().unwrap().clone())
        })
        .collect();
    let mut cloud = Mat::<f64>::zeros(d, n_particles);
    for (c, res) in finals.into_iter().enumerate() {
        let v = res?;
        for r in 0..d {
            cloud[(r, c)] = v[r];
        }
    }
    let field = match grid {
        Some(g) => {
            let kde = kde_fit(cloud.as_ref(), BandwidthRule::Silverman)?;
            let vals = kde.eval_columns(g.points_matrix().as_ref());
            Some(DensityField::new(
                g.clone(),
                vec![t],
                vec![vals],
                Producer::Ensemble,
            )?)
        }
        None => None,
    };
    Ok(EnsembleForecast { cloud, field, t })
}

/// Raw moment of the terminal cloud: mean over particles of x_dim^order.
pub fn cloud_moment(cloud: &Mat<f64>, dim: usize, order: u32) -> f64 {
    let n = cloud.ncols();
    (0..n).map(|c| cloud[(dim, c)].powi(order as i32)).sum::<f64>() / n as f64
}
