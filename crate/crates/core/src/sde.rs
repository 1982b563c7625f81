//! SDE models, time stepping, and stationary snapshot-pair sampling.
//!
//! Models carry a drift b(x) and a diffusion matrix sigma(x) for
//! dX_t = b(X_t) dt + sigma(X_t) dW_t. The four built-in benchmarks are the
//! bistable double well, the 1-D Ornstein-Uhlenbeck process, a quadratic
//! two-dimensional turbulence model, and the noisy Lorenz-63 system.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// State-dependent vector field: reads the state slice, writes the output
/// slice (length d for drifts, row-major d x s for diffusion matrices).
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub struct SdeModel {
    pub name: String,
    pub dim_state: usize,
    pub dim_noise: usize,
    drift: FieldFn,
    diffusion: FieldFn,
    pub params: BTreeMap<String, f64>,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel")
            .field("name", &self.name)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("params", &self.params)
            .finish()
    }
}

impl SdeModel {
    pub fn new(
        name: impl Into<String>,
        dim_state: usize,
        dim_noise: usize,
        drift: FieldFn,
        diffusion: FieldFn,
        params: BTreeMap<String, f64>,
    ) -> Self {
        SdeModel {
            name: name.into(),
            dim_state,
            dim_noise,
            drift,
            diffusion,
            params,
        }
    }

    /// Evaluates b(x) into `out` (length d).
    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.dim_state);
        (self.drift)(x, out);
    }

    /// Evaluates sigma(x) into `out` as a row-major d x s matrix.
    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.dim_state * self.dim_noise);
        (self.diffusion)(x, out);
    }

    pub fn drift_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state];
        self.drift(x, &mut out);
        out
    }

    pub fn diffusion_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_state * self.dim_noise];
        self.diffusion(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    Milstein,
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub burn_in_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(dt: f64, n_steps: usize, burn_in_steps: usize, seed: u64) -> Self {
        SimConfig {
            dt,
            n_steps,
            burn_in_steps,
            seed,
            scheme: Scheme::EulerMaruyama,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::input(format!("dt must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Default burn-in: discard max(1e4 steps, 20% of the trajectory).
pub fn default_burn_in(n_steps: usize) -> usize {
    (n_steps / 5).max(10_000)
}

/// Paired snapshot matrices: column m of `y` is the evolution of column m of
/// `x` over the sampling interval `dt`.
#[derive(Debug, Clone)]
pub struct SnapshotPairs {
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    pub dt: f64,
    pub source_seed: Option<u64>,
}

impl SnapshotPairs {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.nrows() || self.x.ncols() != self.y.ncols() {
            return Err(Error::input("X and Y snapshot matrices must have identical shape"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::input("snapshot interval dt must be positive"));
        }
        Ok(())
    }

    /// Builds pairs from a trajectory by subsampling with the given stride:
    /// X_j = states[offset + j*stride], Y_j = states[offset + (j+1)*stride].
    /// The pair interval is stride * dt.
    pub fn from_trajectory_strided(
        states: &[Vec<f64>],
        dt: f64,
        offset: usize,
        stride: usize,
        m: usize,
        source_seed: Option<u64>,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::input("stride must be >= 1"));
        }
        let need = offset + m * stride;
        if states.len() <= need.max(1) - 1 || states.is_empty() {
            return Err(Error::input(format!(
                "trajectory has {} states, need {} for {} strided pairs",
                states.len(),
                need + 1,
                m
            )));
        }
        let d = states[0].len();
        let x = Mat::<f64>::from_fn(d, m, |r, c| states[offset + c * stride][r]);
        let y = Mat::<f64>::from_fn(d, m, |r, c| states[offset + (c + 1) * stride][r]);
        Ok(SnapshotPairs {
            x,
            y,
            dt: dt * stride as f64,
            source_seed,
        })
    }
}

/// One Euler-Maruyama step x + b(x) dt + sigma(x) * noise, where `noise` is
/// the pre-drawn Wiener increment (variance dt per component).
pub fn em_step(model: &SdeModel, x: &[f64], dt: f64, noise: &[f64]) -> Result<Vec<f64>> {
    check_step_inputs(model, x, noise)?;
    let mut out = x.to_vec();
    let mut drift = vec![0.0; model.dim_state];
    let mut sigma = vec![0.0; model.dim_state * model.dim_noise];
    em_step_into(model, x, dt, noise, &mut out, &mut drift, &mut sigma);
    Ok(out)
}

/// One Milstein step for 1-D diagonal diffusion; the sigma' correction uses a
/// central finite difference. Reduces to Euler-Maruyama for additive noise.
pub fn milstein_step(model: &SdeModel, x: &[f64], dt: f64, noise: &[f64]) -> Result<Vec<f64>> {
    check_step_inputs(model, x, noise)?;
    if model.dim_state != 1 || model.dim_noise != 1 {
        return Err(Error::input(
            "milstein scheme is supported only for 1-D state and 1-D noise",
        ));
    }
    let mut out = vec![0.0; 1];
    milstein_step_into(model, x, dt, noise, &mut out);
    Ok(out)
}

fn check_step_inputs(model: &SdeModel, x: &[f64], noise: &[f64]) -> Result<()> {
    if x.len() != model.dim_state {
        return Err(Error::input(format!(
            "state has length {}, model dimension is {}",
            x.len(),
            model.dim_state
        )));
    }
    if noise.len() != model.dim_noise {
        return Err(Error::input(format!(
            "noise has length {}, model noise dimension is {}",
            noise.len(),
            model.dim_noise
        )));
    }
    Ok(())
}

fn em_step_into(
    model: &SdeModel,
    x: &[f64],
    dt: f64,
    noise: &[f64],
    out: &mut [f64],
    drift: &mut [f64],
    sigma: &mut [f64],
) {
    model.drift(x, drift);
    model.diffusion(x, sigma);
    let s = model.dim_noise;
    for (i, o) in out.iter_mut().enumerate() {
        let mut v = x[i] + drift[i] * dt;
        for (k, nz) in noise.iter().enumerate() {
            v += sigma[i * s + k] * nz;
        }
        *o = v;
    }
}

fn milstein_step_into(model: &SdeModel, x: &[f64], dt: f64, noise: &[f64], out: &mut [f64]) {
    let mut b = [0.0];
    let mut s0 = [0.0];
    model.drift(x, &mut b);
    model.diffusion(x, &mut s0);
    let h = 1e-6 * x[0].abs().max(1.0);
    let mut sp = [0.0];
    let mut sm = [0.0];
    model.diffusion(&[x[0] + h], &mut sp);
    model.diffusion(&[x[0] - h], &mut sm);
    let dsigma = (sp[0] - sm[0]) / (2.0 * h);
    let dw = noise[0];
    out[0] = x[0] + b[0] * dt + s0[0] * dw + 0.5 * s0[0] * dsigma * (dw * dw - dt);
}

/// Simulates a trajectory of `n_steps` steps; returns n_steps + 1 states with
/// state[0] = x0. Deterministic for a given seed. A non-finite state aborts
/// with the offending step index.
pub fn simulate_trajectory(model: &SdeModel, x0: &[f64], config: &SimConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if x0.len() != model.dim_state {
        return Err(Error::input(format!(
            "x0 has length {}, model dimension is {}",
            x0.len(),
            model.dim_state
        )));
    }
    if config.scheme == Scheme::Milstein && (model.dim_state != 1 || model.dim_noise != 1) {
        return Err(Error::input(
            "milstein scheme is supported only for 1-D state and 1-D noise",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut states = Vec::with_capacity(config.n_steps + 1);
    states.push(x0.to_vec());
    let mut walker = Walker::new(model, config.scheme, config.dt);
    let mut cur = x0.to_vec();
    for step in 1..=config.n_steps {
        walker.advance(&mut cur, &mut rng)?;
        if let Some(i) = cur.iter().position(|v| !v.is_finite()) {
            let _ = i;
            return Err(Error::SimulationDiverged { step });
        }
        states.push(cur.clone());
    }
    Ok(states)
}

/// Reusable stepping state for one trajectory (buffers + scheme dispatch).
struct Walker<'a> {
    model: &'a SdeModel,
    scheme: Scheme,
    dt: f64,
    sqrt_dt: f64,
    noise: Vec<f64>,
    drift: Vec<f64>,
    sigma: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(model: &'a SdeModel, scheme: Scheme, dt: f64) -> Self {
        Walker {
            model,
            scheme,
            dt,
            sqrt_dt: dt.sqrt(),
            noise: vec![0.0; model.dim_noise],
            drift: vec![0.0; model.dim_state],
            sigma: vec![0.0; model.dim_state * model.dim_noise],
            next: vec![0.0; model.dim_state],
        }
    }

    fn advance(&mut self, state: &mut [f64], rng: &mut ChaCha8Rng) -> Result<()> {
        for nz in self.noise.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *nz = self.sqrt_dt * z;
        }
        match self.scheme {
            Scheme::EulerMaruyama => em_step_into(
                self.model,
                state,
                self.dt,
                &self.noise,
                &mut self.next,
                &mut self.drift,
                &mut self.sigma,
            ),
            Scheme::Milstein => {
                milstein_step_into(self.model, state, self.dt, &self.noise, &mut self.next)
            }
        }
        state.copy_from_slice(&self.next);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    SingleTrajectory,
    Ensemble,
}

/// Draws M stationary snapshot pairs separated by dt.
///
/// Single-trajectory mode takes consecutive post-burn-in states of one path;
/// ensemble mode runs M independent trajectories (RNG seeded with
/// seed XOR trajectory index) and takes each one's final pre/post pair.
pub fn sample_stationary_pairs(
    model: &SdeModel,
    config: &SimConfig,
    m: usize,
    mode: SampleMode,
) -> Result<SnapshotPairs> {
    sample_stationary_pairs_strided(model, config, m, mode, 1)
}

/// As [`sample_stationary_pairs`], but with pairs separated by
/// `stride` integration steps, so the pair interval is stride * dt. Larger
/// intervals widen the Koopman eigenvalue gaps without coarsening the
/// integration step.
pub fn sample_stationary_pairs_strided(
    model: &SdeModel,
    config: &SimConfig,
    m: usize,
    mode: SampleMode,
    stride: usize,
) -> Result<SnapshotPairs> {
    config.validate()?;
    if m == 0 {
        return Err(Error::input("need at least one snapshot pair"));
    }
    if stride == 0 {
        return Err(Error::input("stride must be >= 1"));
    }
    let x0 = vec![0.0; model.dim_state];
    match mode {
        SampleMode::SingleTrajectory => {
            let n_steps = config.burn_in_steps + m * stride;
            let cfg = SimConfig {
                n_steps,
                ..config.clone()
            };
            let states = simulate_trajectory(model, &x0, &cfg)?;
            SnapshotPairs::from_trajectory_strided(
                &states,
                config.dt,
                config.burn_in_steps,
                stride,
                m,
                Some(config.seed),
            )
        }
        SampleMode::Ensemble => {
            let d = model.dim_state;
            let n_steps = config.burn_in_steps + stride;
            let pairs: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..m)
                .into_par_iter()
                .map(|idx| {
                    let cfg = SimConfig {
                        n_steps,
                        seed: config.seed ^ idx as u64,
                        ..config.clone()
                    };
                    let states = simulate_trajectory(model, &x0, &cfg)?;
                    Ok((
                        states[config.burn_in_steps].clone(),
                        states[config.burn_in_steps + stride].clone(),
                    ))
                })
                .collect();
            let mut xs = Vec::with_capacity(m);
            let mut ys = Vec::with_capacity(m);
            for p in pairs {
                let (x, y) = p?;
                xs.push(x);
                ys.push(y);
            }
            let x = Mat::<f64>::from_fn(d, m, |r, c| xs[c][r]);
            let y = Mat::<f64>::from_fn(d, m, |r, c| ys[c][r]);
            Ok(SnapshotPairs {
                x,
                y,
                dt: config.dt * stride as f64,
                source_seed: Some(config.seed),
            })
        }
    }
}

pub const BUILTIN_MODEL_NAMES: [&str; 4] = ["double-well", "ou", "turbulence2d", "lorenz63"];

/// Constructs a built-in benchmark model with optional parameter overrides.
pub fn builtin_model(name: &str, overrides: &BTreeMap<String, f64>) -> Result<SdeModel> {
    match name {
        "double-well" | "doublewell" => double_well(overrides),
        "ou" => ou(overrides),
        "turbulence2d" => turbulence2d(overrides),
        "lorenz63" => lorenz63(overrides),
        other => Err(Error::input(format!(
            "unknown model '{other}'; valid models: {}",
            BUILTIN_MODEL_NAMES.join(", ")
        ))),
    }
}

fn resolve_params(
    model: &str,
    defaults: &[(&str, f64)],
    overrides: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut params: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::input(format!(
                "model '{model}' has no parameter '{k}'; valid parameters: {}",
                defaults.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            )));
        }
        params.insert(k.clone(), *v);
    }
    Ok(params)
}

/// Bistable double well dX = -4 X (X - 1)(X + 5/4) dt + sigma dW with stable
/// points x = 1 and x = -5/4.
fn double_well(overrides: &BTreeMap<String, f64>) -> Result<SdeModel> {
    let params = resolve_params("double-well", &[("sigma", 2.0f64.sqrt())], overrides)?;
    let sigma = params["sigma"];
    Ok(SdeModel::new(
        "double-well",
        1,
        1,
        Arc::new(|x: &[f64], out: &mut [f64]| {
            out[0] = -4.0 * x[0] * (x[0] - 1.0) * (x[0] + 1.25);
        }),
        Arc::new(move |_x: &[f64], out: &mut [f64]| {
            out[0] = sigma;
        }),
        params,
    ))
}

/// Ornstein-Uhlenbeck dX = -lambda X dt + beta dW.
fn ou(overrides: &BTreeMap<String, f64>) -> Result<SdeModel> {
    let params = resolve_params("ou", &[("lambda", 1.0), ("beta", 2.0f64.sqrt())], overrides)?;
    let lambda = params["lambda"];
    let beta = params["beta"];
    Ok(SdeModel::new(
        "ou",
        1,
        1,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = -lambda * x[0];
        }),
        Arc::new(move |_x: &[f64], out: &mut [f64]| {
            out[0] = beta;
        }),
        params,
    ))
}

/// Principal square root of a symmetric positive-definite 2x2 matrix,
/// S = (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det)) (exact by Cayley-Hamilton).
fn sqrt_spd_2x2(a11: f64, a12: f64, a22: f64) -> Result<(f64, f64, f64)> {
    let det = a11 * a22 - a12 * a12;
    if !(a11 > 0.0 && det > 0.0) {
        return Err(Error::input("noise covariance Lambda must be positive definite"));
    }
    let sd = det.sqrt();
    let tau = (a11 + a22 + 2.0 * sd).sqrt();
    Ok(((a11 + sd) / tau, a12 / tau, (a22 + sd) / tau))
}

/// Two-dimensional quadratic turbulence model with energy-conserving
/// nonlinearity:
///   du = ( uv/2 - d L11 u + (1 - d L12) v) dt + S_1 . dW
///   dv = (-u^2/2 + (-1 - d L12) u - d L22 v) dt + S_2 . dW
/// with S = Lambda^(1/2).
fn turbulence2d(overrides: &BTreeMap<String, f64>) -> Result<SdeModel> {
    let params = resolve_params(
        "turbulence2d",
        &[("d", 0.5), ("lam11", 1.0), ("lam12", 0.25), ("lam22", 1.0)],
        overrides,
    )?;
    let d = params["d"];
    let (l11, l12, l22) = (params["lam11"], params["lam12"], params["lam22"]);
    let (s11, s12, s22) = sqrt_spd_2x2(l11, l12, l22)?;
    Ok(SdeModel::new(
        "turbulence2d",
        2,
        2,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            let (u, v) = (x[0], x[1]);
            out[0] = 0.5 * u * v - d * l11 * u + (1.0 - d * l12) * v;
            out[1] = -0.5 * u * u + (-1.0 - d * l12) * u - d * l22 * v;
        }),
        Arc::new(move |_x: &[f64], out: &mut [f64]| {
            out[0] = s11;
            out[1] = s12;
            out[2] = s12;
            out[3] = s22;
        }),
        params,
    ))
}

/// Noisy Lorenz-63 with standard parameters sigma = 10, rho = 28, beta = 8/3
/// and independent additive noise of intensity 0.1 per component.
fn lorenz63(overrides: &BTreeMap<String, f64>) -> Result<SdeModel> {
    let params = resolve_params(
        "lorenz63",
        &[
            ("sigma", 10.0),
            ("rho", 28.0),
            ("beta", 8.0 / 3.0),
            ("qx", 0.1),
            ("qy", 0.1),
            ("qz", 0.1),
        ],
        overrides,
    )?;
    let (sigma, rho, beta) = (params["sigma"], params["rho"], params["beta"]);
    let (qx, qy, qz) = (params["qx"], params["qy"], params["qz"]);
    Ok(SdeModel::new(
        "lorenz63",
        3,
        3,
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = sigma * (x[1] - x[0]);
            out[1] = x[0] * (rho - x[2]) - x[1];
            out[2] = x[0] * x[1] - beta * x[2];
        }),
        Arc::new(move |_x: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            out[0] = qx;
            out[4] = qy;
            out[8] = qz;
        }),
        params,
    ))
}
