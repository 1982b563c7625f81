//! The spectral density forecaster: importance-sampled expansion
//! coefficients, density evaluation p_N(x,t) = Re[sum_i c_i(0) e^{lambda_i t}
//! phi_i(x)] p_s(x), and moment forecasts through weighted inner products.
//!
//! The coefficients are computed once at t = 0; time evolution multiplies
//! mode i by e^{lambda_i t} and never re-estimates anything.

use faer::MatRef;
use num_complex::Complex64;

use crate::density::grid::{DensityField, Grid, Producer};
use crate::density::stationary::{InitialDensity, StationaryDensity, PS_FLOOR};
use crate::edmd::KoopmanModel;
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum_complex;

/// Importance-sampling estimate of the expansion coefficients
/// c_i(0) = (1/M) sum_m conj(phi_i(x_m)) p_0(x_m)/p_s(x_m), the sum running
/// over the stationary samples with the eigenfunction index fixed.
///
/// Errors if p_s underflows at any sample.
pub fn coefficients(
    koopman: &KoopmanModel,
    ps: &StationaryDensity,
    p0: &InitialDensity,
    train_x: MatRef<'_, f64>,
) -> Result<Vec<Complex64>> {
    if ps.dim() != koopman.dim_state() {
        return Err(Error::input("stationary density dimension mismatch"));
    }
    if train_x.nrows() != koopman.dim_state() {
        return Err(Error::input("training sample dimension mismatch"));
    }
    let m = train_x.ncols();
    let d = train_x.nrows();
    // importance weights p_0/p_s in log space
    let mut weights = vec![0.0f64; m];
    let mut point = vec![0.0; d];
    let stationary_p0 = matches!(p0, InitialDensity::Stationary);
    for (c, w) in weights.iter_mut().enumerate() {
        if stationary_p0 {
            *w = 1.0;
            continue;
        }
        for r in 0..d {
            point[r] = train_x[(r, c)];
        }
        let ln_ps = ps.ln_eval(&point);
        if ln_ps < PS_FLOOR.ln() {
            return Err(Error::DegenerateWeight {
                sample: c,
                value: ln_ps.exp(),
            });
        }
        *w = (p0.ln_eval(&point, ps) - ln_ps).exp();
    }
    let psi = koopman.dict.eval_matrix(train_x)?;
    let phis = koopman.eigenfunctions_on(psi.as_ref());
    let mut c0 = Vec::with_capacity(phis.len());
    let mut terms = vec![Complex64::new(0.0, 0.0); m];
    for phi in &phis {
        for ((t, p), w) in terms.iter_mut().zip(phi).zip(&weights) {
            *t = p.conj() * w;
        }
        c0.push(pairwise_sum_complex(&terms) / m as f64);
    }
    Ok(c0)
}

/// A fitted spectral forecaster: Koopman eigenpairs, the stationary density,
/// frozen t = 0 coefficients, and the training samples retained for
/// sample-based expectations.
#[derive(Debug, Clone)]
pub struct SpectralForecastModel {
    pub koopman: KoopmanModel,
    pub ps: StationaryDensity,
    pub c0: Vec<Complex64>,
    pub train_x: faer::Mat<f64>,
}

impl SpectralForecastModel {
    pub fn new(
        koopman: KoopmanModel,
        ps: StationaryDensity,
        p0: &InitialDensity,
        train_x: faer::Mat<f64>,
    ) -> Result<Self> {
        let c0 = coefficients(&koopman, &ps, p0, train_x.as_ref())?;
        Ok(SpectralForecastModel {
            koopman,
            ps,
            c0,
            train_x,
        })
    }

    pub fn from_parts(
        koopman: KoopmanModel,
        ps: StationaryDensity,
        c0: Vec<Complex64>,
        train_x: faer::Mat<f64>,
    ) -> Result<Self> {
        if c0.len() != koopman.n_modes() {
            return Err(Error::input("coefficient count must match mode count"));
        }
        Ok(SpectralForecastModel {
            koopman,
            ps,
            c0,
            train_x,
        })
    }

    pub fn dim(&self) -> usize {
        self.koopman.dim_state()
    }

    /// Mode coefficients at time t: c_i(t) = e^{lambda_i t} c_i(0).
    pub fn coefficients_at(&self, t: f64) -> Vec<Complex64> {
        self.koopman
            .lambda
            .iter()
            .zip(&self.c0)
            .map(|(l, c)| (l * t).exp() * c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForecastOptions {
    /// Exclude modes with Re(lambda) > 1e-6.
    pub drop_unstable: bool,
    /// Clamp negative density values to zero and renormalize to unit mass.
    pub clip_negative: bool,
}

/// Per-forecast diagnostics.
#[derive(Debug, Clone, Default)]
pub struct ForecastReport {
    /// max |Im(sum)| * p_s over the grid, per time.
    pub max_imag_residual: Vec<f64>,
    /// Renormalization factor applied per time (1 when clipping is off or no
    /// clipping occurred).
    pub renormalization: Vec<f64>,
    pub dropped_modes: usize,
}

/// Evaluates the spectral forecast on a grid at one time.
pub fn forecast_density(
    model: &SpectralForecastModel,
    t: f64,
    grid: &Grid,
    options: ForecastOptions,
) -> Result<(DensityField, ForecastReport)> {
    forecast_density_multi(model, &[t], grid, options)
}

/// Evaluates the spectral forecast on a grid at several times, sharing the
/// per-point eigenfunction work across times.
pub fn forecast_density_multi(
    model: &SpectralForecastModel,
    times: &[f64],
    grid: &Grid,
    options: ForecastOptions,
) -> Result<(DensityField, ForecastReport)> {
    if grid.dim() != model.dim() {
        return Err(Error::input(format!(
            "grid dimension {} does not match model dimension {}",
            grid.dim(),
            model.dim()
        )));
    }
    if times.is_empty() {
        return Err(Error::input("need at least one forecast time"));
    }
    if times.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::input("forecast times must be nonnegative"));
    }
    let points = grid.points_matrix();
    let psi = model.koopman.dict.eval_matrix(points.as_ref())?;
    let phis = model.koopman.eigenfunctions_on(psi.as_ref());
    let ps_vals = model.ps.eval_columns(points.as_ref());
    let keep: Vec<usize> = (0..model.koopman.n_modes())
        .filter(|&i| !options.drop_unstable || model.koopman.lambda[i].re <= 1e-6)
        .collect();
    let dropped = model.koopman.n_modes() - keep.len();

    let p = grid.n_points();
    let mut values = Vec::with_capacity(times.len());
    let mut report = ForecastReport {
        dropped_modes: dropped,
        ..Default::default()
    };
    for &t in times {
        let mut field = vec![Complex64::new(0.0, 0.0); p];
        for &i in &keep {
            let coef = (model.koopman.lambda[i] * t).exp() * model.c0[i];
            for (f, phi) in field.iter_mut().zip(&phis[i]) {
                *f += coef * phi;
            }
        }
        let mut vals = vec![0.0f64; p];
        let mut max_imag = 0.0f64;
        for (idx, (v, f)) in vals.iter_mut().zip(&field).enumerate() {
            *v = f.re * ps_vals[idx];
            max_imag = max_imag.max((f.im * ps_vals[idx]).abs());
        }
        let mut renorm = 1.0;
        if options.clip_negative {
            let mut clipped = false;
            for v in vals.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    clipped = true;
                }
            }
            if clipped {
                let mass = grid.integrate(&vals);
                if mass > 0.0 {
                    renorm = 1.0 / mass;
                    for v in vals.iter_mut() {
                        *v *= renorm;
                    }
                }
            }
        }
        report.max_imag_residual.push(max_imag);
        report.renormalization.push(renorm);
        values.push(vals);
    }
    // DensityField requires strictly ascending times; forecasts are evaluated
    // in the caller's order, so sort indices if needed.
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].partial_cmp(&times[j]).unwrap());
    let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    if sorted_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("forecast times must be distinct"));
    }
    let sorted_values: Vec<Vec<f64>> = order.iter().map(|&i| values[i].clone()).collect();
    let field = DensityField::new(grid.clone(), sorted_times, sorted_values, Producer::Dpdd)?;
    Ok((field, report))
}

/// Spectral expectation forecast E[g](t) = Re[sum_i c_i(0) e^{lambda_i t}
/// g_i] with g_i = (1/M) sum_m g(x_m) conj(phi_i(x_m)).
pub fn expectation(
    model: &SpectralForecastModel,
    g: &dyn Fn(&[f64]) -> f64,
    t: f64,
) -> Result<f64> {
    let g_hat = project_observable(model, g)?;
    Ok(expectation_from_projection(model, &g_hat, t))
}

/// The weighted projections g_i of an observable onto the eigenfunctions.
pub fn project_observable(
    model: &SpectralForecastModel,
    g: &dyn Fn(&[f64]) -> f64,
) -> Result<Vec<Complex64>> {
    let x = model.train_x.as_ref();
    let m = x.ncols();
    let d = x.nrows();
    let mut g_vals = vec![0.0f64; m];
    let mut point = vec![0.0; d];
    for (c, gv) in g_vals.iter_mut().enumerate() {
        for r in 0..d {
            point[r] = x[(r, c)];
        }
        *gv = g(&point);
    }
    let psi = model.koopman.dict.eval_matrix(x)?;
    let phis = model.koopman.eigenfunctions_on(psi.as_ref());
    let mut out = Vec::with_capacity(phis.len());
    let mut terms = vec![Complex64::new(0.0, 0.0); m];
    for phi in &phis {
        for ((term, p), gv) in terms.iter_mut().zip(phi).zip(&g_vals) {
            *term = p.conj() * gv;
        }
        out.push(pairwise_sum_complex(&terms) / m as f64);
    }
    Ok(out)
}

pub fn expectation_from_projection(
    model: &SpectralForecastModel,
    g_hat: &[Complex64],
    t: f64,
) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for ((l, c), gh) in model.koopman.lambda.iter().zip(&model.c0).zip(g_hat) {
        acc += (l * t).exp() * c * gh;
    }
    acc.re
}

/// Raw-moment forecasts per coordinate and order.
#[derive(Debug, Clone)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub rows: Vec<MomentRow>,
}

#[derive(Debug, Clone)]
pub struct MomentRow {
    /// 1-based coordinate index.
    pub dim: usize,
    pub order: u32,
    pub values: Vec<f64>,
}

/// Forecasts E[x_j^k](t) for every coordinate j and requested order k.
pub fn raw_moments(
    model: &SpectralForecastModel,
    orders: &[u32],
    times: &[f64],
) -> Result<MomentSeries> {
    if orders.is_empty() || times.is_empty() {
        return Err(Error::input("need at least one order and one time"));
    }
    if orders.iter().any(|&k| k == 0) {
        return Err(Error::input("moment orders must be positive"));
    }
    let d = model.dim();
    let mut rows = Vec::with_capacity(d * orders.len());
    for j in 0..d {
        for &k in orders {
            let g = move |x: &[f64]| x[j].powi(k as i32);
            let g_hat = project_observable(model, &g)?;
            let values = times
                .iter()
                .map(|&t| expectation_from_projection(model, &g_hat, t))
                .collect();
            rows.push(MomentRow {
                dim: j + 1,
                order: k,
                values,
            });
        }
    }
    Ok(MomentSeries {
        times: times.to_vec(),
        rows,
    })
}
