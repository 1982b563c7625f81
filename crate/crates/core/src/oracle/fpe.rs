//! 1-D Fokker-Planck reference solver: flux-form central differences on cell
//! centers with zero-flux boundaries and Crank-Nicolson time stepping.
//!
//! The face flux between cells i and i+1 is
//!   J_{i+1/2} = b_{i+1/2} (p_i + p_{i+1})/2 - (S_{i+1} p_{i+1} - S_i p_i)/(2h)
//! with S = sigma sigma^T, and dp_i/dt = -(J_{i+1/2} - J_{i-1/2})/h. Every
//! face flux enters two cells with opposite signs and the boundary fluxes are
//! zero, so the cell-sum mass is conserved to solver roundoff, and any steady
//! state of the discretization has exactly vanishing interior fluxes.

use crate::density::{DensityField, Grid, Producer};
use crate::error::{Error, Result};
use crate::sde::SdeModel;

#[derive(Debug, Clone)]
pub struct FpeConfig {
    pub domain: (f64, f64),
    pub n_cells: usize,
    pub dt: f64,
}

impl FpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.domain.0 < self.domain.1) {
            return Err(Error::input("domain must satisfy a < b"));
        }
        if self.n_cells < 50 {
            return Err(Error::input("need at least 50 cells"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::input("dt must be positive"));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        (self.domain.1 - self.domain.0) / self.n_cells as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.domain.0 + (i as f64 + 0.5) * self.cell_width()
    }

    /// Cell centers as a 1-D grid (spacing h, endpoints at a + h/2, b - h/2).
    pub fn center_grid(&self) -> Grid {
        Grid::line(self.cell_center(0), self.cell_center(self.n_cells - 1), self.n_cells).unwrap()
    }
}

/// Tridiagonal generator of the semi-discrete system dp/dt = L p.
struct FluxOperator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

fn build_operator(model: &SdeModel, config: &FpeConfig) -> FluxOperator {
    let n = config.n_cells;
    let h = config.cell_width();
    // face quantities at x_{i+1/2}, i = 0..n-2 (interior faces only)
    let mut alpha = vec![0.0; n - 1]; // coefficient of p_i in J_{i+1/2}
    let mut beta = vec![0.0; n - 1]; // coefficient of p_{i+1}
    let sigma2 = |x: f64| -> f64 {
        let mut out = vec![0.0; model.dim_noise];
        model.diffusion(&[x], &mut out);
        out.iter().map(|s| s * s).sum()
    };
    let drift = |x: f64| -> f64 {
        let mut out = [0.0];
        model.drift(&[x], &mut out);
        out[0]
    };
    for i in 0..n - 1 {
        let x_face = config.domain.0 + (i as f64 + 1.0) * h;
        let b_face = drift(x_face);
        let s_i = sigma2(config.cell_center(i));
        let s_ip = sigma2(config.cell_center(i + 1));
        alpha[i] = 0.5 * b_face + 0.5 * s_i / h;
        beta[i] = 0.5 * b_face - 0.5 * s_ip / h;
    }
    // dp_i/dt = -(J_{i+1/2} - J_{i-1/2})/h with J = 0 at the boundary faces
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        if i < n - 1 {
            diag[i] -= alpha[i] / h;
            upper[i] -= beta[i] / h;
        }
        if i > 0 {
            lower[i] += alpha[i - 1] / h;
            diag[i] += beta[i - 1] / h;
        }
    }
    FluxOperator { lower, diag, upper }
}

/// Thomas solve of a tridiagonal system (a, b, c) x = d.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut Vec<f64>) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut bp = b.to_vec();
    for i in 1..n {
        let w = a[i] / bp[i - 1];
        bp[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    cp.copy_from_slice(c);
    d[n - 1] /= bp[n - 1];
    for i in (0..n - 1).rev() {
        d[i] = (d[i] - cp[i] * d[i + 1]) / bp[i];
    }
}

/// Discrete face fluxes of a profile (n-1 interior faces).
pub fn discrete_fluxes(model: &SdeModel, config: &FpeConfig, p: &[f64]) -> Vec<f64> {
    let n = config.n_cells;
    let h = config.cell_width();
    let sigma2 = |x: f64| -> f64 {
        let mut out = vec![0.0; model.dim_noise];
        model.diffusion(&[x], &mut out);
        out.iter().map(|s| s * s).sum()
    };
    let drift = |x: f64| -> f64 {
        let mut out = [0.0];
        model.drift(&[x], &mut out);
        out[0]
    };
    (0..n - 1)
        .map(|i| {
            let x_face = config.domain.0 + (i as f64 + 1.0) * h;
            let b_face = drift(x_face);
            let s_i = sigma2(config.cell_center(i));
            let s_ip = sigma2(config.cell_center(i + 1));
            b_face * 0.5 * (p[i] + p[i + 1]) - (s_ip * p[i + 1] - s_i * p[i]) / (2.0 * h)
        })
        .collect()
}

/// Crank-Nicolson evolution of the Fokker-Planck equation; returns densities
/// at the requested times (nearest step). `p0_grid` holds cell-center values
/// and must be nonnegative with cell-sum integral 1 +- 1e-6.
pub fn fpe_solve_1d(
    model: &SdeModel,
    p0_grid: &[f64],
    config: &FpeConfig,
    times: &[f64],
) -> Result<DensityField> {
    config.validate()?;
    if model.dim_state != 1 {
        return Err(Error::input("the Fokker-Planck reference solver is 1-D only"));
    }
    let n = config.n_cells;
    if p0_grid.len() != n {
        return Err(Error::input(format!(
            "initial density has {} values for {} cells",
            p0_grid.len(),
            n
        )));
    }
    if p0_grid.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::input("initial density must be nonnegative and finite"));
    }
    let h = config.cell_width();
    let mass0: f64 = p0_grid.iter().sum::<f64>() * h;
    if (mass0 - 1.0).abs() > 1e-6 {
        return Err(Error::input(format!(
            "initial density integrates to {mass0}, expected 1 within 1e-6"
        )));
    }
    if times.is_empty() {
        return Err(Error::input("need at least one output time"));
    }
    let mut sorted_times = times.to_vec();
    sorted_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted_times[0] < 0.0 {
        return Err(Error::input("output times must be nonnegative"));
    }
    if sorted_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("output times must be distinct"));
    }

    let op = build_operator(model, config);
    let dt = config.dt;
    // CN matrices: (I - dt/2 L) p^{n+1} = (I + dt/2 L) p^n
    let half = 0.5 * dt;
    let la: Vec<f64> = op.lower.iter().map(|v| -half * v).collect();
    let lb: Vec<f64> = op.diag.iter().map(|v| 1.0 - half * v).collect();
    let lc: Vec<f64> = op.upper.iter().map(|v| -half * v).collect();

    let steps: Vec<usize> = sorted_times.iter().map(|t| (t / dt).round() as usize).collect();
    let max_step = *steps.last().unwrap();

    let mut p = p0_grid.to_vec();
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(steps.len());
    let record = |step: usize, p: &[f64], outputs: &mut Vec<Vec<f64>>| {
        while outputs.len() < steps.len() && steps[outputs.len()] == step {
            outputs.push(p.to_vec());
        }
    };
    record(0, &p, &mut outputs);
    let mut prev_mass = mass0;
    for step in 1..=max_step {
        // rhs = (I + dt/2 L) p
        let nn = p.len();
        let mut rhs = vec![0.0; nn];
        for i in 0..nn {
            let mut acc = p[i] * (1.0 + half * op.diag[i]);
            if i > 0 {
                acc += half * op.lower[i] * p[i - 1];
            }
            if i + 1 < nn {
                acc += half * op.upper[i] * p[i + 1];
            }
            rhs[i] = acc;
        }
        thomas(&la, &lb, &lc, &mut rhs);
        p = rhs;
        let mass: f64 = p.iter().sum::<f64>() * h;
        if (mass - prev_mass).abs() > 1e-6 {
            return Err(Error::input(format!(
                "unstable configuration: mass drifted by {:+e} in one step (step {step}); reduce dt",
                mass - prev_mass
            )));
        }
        prev_mass = mass;
        record(step, &p, &mut outputs);
    }
    DensityField::new(config.center_grid(), sorted_times, outputs, Producer::Fpe)
}
