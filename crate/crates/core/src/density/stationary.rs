//! Stationary and initial densities: analytic invariant densities for the
//! 1-D benchmarks and Gaussian-kernel density estimates fitted to stationary
//! samples.

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453; // ln(2 pi)

/// Hard floor below which an importance weight denominator counts as
/// underflowed.
pub const PS_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    Silverman,
    KnnVariable,
}

/// Gaussian-product KDE with per-dimension base bandwidths and an optional
/// per-point scale factor (the variable-bandwidth rule).
#[derive(Debug, Clone)]
pub struct KdeDensity {
    samples: Mat<f64>,
    base_bandwidths: Vec<f64>,
    point_scales: Vec<f64>,
    rule: BandwidthRule,
}

impl KdeDensity {
    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn rule(&self) -> BandwidthRule {
        self.rule
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.base_bandwidths
    }

    pub fn point_scales(&self) -> &[f64] {
        &self.point_scales
    }

    pub fn samples(&self) -> MatRef<'_, f64> {
        self.samples.as_ref()
    }

    /// Rebuilds from serialized parts (shape checks only).
    pub fn from_parts(
        samples: Mat<f64>,
        base_bandwidths: Vec<f64>,
        point_scales: Vec<f64>,
        rule: BandwidthRule,
    ) -> Result<Self> {
        if base_bandwidths.len() != samples.nrows() {
            return Err(Error::input("bandwidth count must match dimension"));
        }
        if point_scales.len() != samples.ncols() {
            return Err(Error::input("point-scale count must match sample count"));
        }
        if base_bandwidths.iter().any(|&h| !(h > 0.0)) || point_scales.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::input("bandwidths must be positive"));
        }
        Ok(KdeDensity {
            samples,
            base_bandwidths,
            point_scales,
            rule,
        })
    }

    fn ln_eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let m = self.n_samples();
        // log-sum-exp over kernels
        let mut max_term = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(m);
        for i in 0..m {
            let s = self.point_scales[i];
            let mut expo = 0.0;
            let mut ln_det = 0.0;
            for j in 0..d {
                let h = self.base_bandwidths[j] * s;
                let z = (x[j] - self.samples[(j, i)]) / h;
                expo -= 0.5 * z * z;
                ln_det += h.ln();
            }
            let t = expo - ln_det;
            terms.push(t);
            if t > max_term {
                max_term = t;
            }
        }
        if !max_term.is_finite() {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
        max_term + sum.ln() - (m as f64).ln() - 0.5 * d as f64 * LN_2PI
    }
}

/// Evaluable stationary density p_s: either a closed form with numerically
/// computed normalization, or a kernel estimate over stationary samples.
#[derive(Debug, Clone)]
pub enum StationaryDensity {
    /// Product of independent Gaussians (diagonal covariance).
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    /// Double-well invariant density p_s ~ exp(-(2/sigma^2)(x^4 + x^3/3 - 5x^2/2)),
    /// normalized by trapezoid quadrature over `domain`.
    DoubleWell { sigma: f64, domain: (f64, f64), ln_z: f64 },
    Kde(KdeDensity),
}

/// Double-well potential V with b = -4x(x-1)(x+5/4) = -V'.
pub fn double_well_potential(x: f64) -> f64 {
    x.powi(4) + x.powi(3) / 3.0 - 2.5 * x * x
}

impl StationaryDensity {
    pub fn standard_gaussian(dim: usize) -> Self {
        StationaryDensity::Gaussian {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() || mean.is_empty() {
            return Err(Error::input("gaussian mean and variance dimensions differ"));
        }
        if var.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::input("gaussian variances must be positive"));
        }
        Ok(StationaryDensity::Gaussian { mean, var })
    }

    /// Builds the analytic double-well density, computing ln Z by quadrature
    /// on a fine grid over `domain`.
    pub fn double_well(sigma: f64, domain: (f64, f64)) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::input("sigma must be positive"));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::input("domain must satisfy lower < upper"));
        }
        let n = 20_001;
        let h = (domain.1 - domain.0) / (n - 1) as f64;
        let beta = 2.0 / (sigma * sigma);
        let mut z = 0.0;
        for i in 0..n {
            let x = domain.0 + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            z += w * (-beta * double_well_potential(x)).exp();
        }
        z *= h;
        Ok(StationaryDensity::DoubleWell {
            sigma,
            domain,
            ln_z: z.ln(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            StationaryDensity::Gaussian { mean, .. } => mean.len(),
            StationaryDensity::DoubleWell { .. } => 1,
            StationaryDensity::Kde(k) => k.dim(),
        }
    }

    pub fn ln_eval(&self, x: &[f64]) -> f64 {
        match self {
            StationaryDensity::Gaussian { mean, var } => {
                let mut acc = 0.0;
                for j in 0..mean.len() {
                    let z = x[j] - mean[j];
                    acc -= 0.5 * (z * z / var[j] + var[j].ln() + LN_2PI);
                }
                acc
            }
            StationaryDensity::DoubleWell { sigma, ln_z, .. } => {
                -(2.0 / (sigma * sigma)) * double_well_potential(x[0]) - ln_z
            }
            StationaryDensity::Kde(k) => k.ln_eval(x),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.ln_eval(x).exp()
    }

    /// Evaluates p_s at every column of a state matrix (parallel over points).
    pub fn eval_columns(&self, x: MatRef<'_, f64>) -> Vec<f64> {
        let d = x.nrows();
        let cols: Vec<usize> = (0..x.ncols()).collect();
        cols.par_iter()
            .map(|&c| {
                let mut point = vec![0.0; d];
                for r in 0..d {
                    point[r] = x[(r, c)];
                }
                self.eval(&point)
            })
            .collect()
    }
}

/// Fits a Gaussian KDE to stationary samples (d x M).
///
/// Silverman: per-dimension bandwidth h_j = sigma_j (4/((d+2)M))^(1/(d+4)).
/// Knn-variable: per-point scale proportional to the distance to the
/// ceil(sqrt(M))-th neighbor, normalized so the median scale matches the
/// Silverman bandwidth; each kernel stays a normalized Gaussian, so the
/// estimator integrates to one.
pub fn kde_fit(samples: MatRef<'_, f64>, rule: BandwidthRule) -> Result<StationaryDensity> {
    let d = samples.nrows();
    let m = samples.ncols();
    if m < 10 {
        return Err(Error::input(format!("kde needs at least 10 samples, got {m}")));
    }
    let mut base = Vec::with_capacity(d);
    for j in 0..d {
        let mean: f64 = (0..m).map(|c| samples[(j, c)]).sum::<f64>() / m as f64;
        let var: f64 = (0..m).map(|c| (samples[(j, c)] - mean).powi(2)).sum::<f64>() / m as f64;
        if !(var > 0.0) {
            return Err(Error::input(format!(
                "samples are degenerate: zero variance in dimension {j}"
            )));
        }
        let factor = (4.0 / ((d as f64 + 2.0) * m as f64)).powf(1.0 / (d as f64 + 4.0));
        base.push(var.sqrt() * factor);
    }
    let point_scales = match rule {
        BandwidthRule::Silverman => vec![1.0; m],
        BandwidthRule::KnnVariable => {
            let k = (m as f64).sqrt().ceil() as usize;
            // distances in bandwidth-whitened coordinates
            let dists: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut all: Vec<f64> = (0..m)
                        .map(|l| {
                            let mut acc = 0.0;
                            for j in 0..d {
                                let z = (samples[(j, i)] - samples[(j, l)]) / base[j];
                                acc += z * z;
                            }
                            acc
                        })
                        .collect();
                    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    all[k.min(m - 1)].sqrt()
                })
                .collect();
            let mut sorted = dists.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[m / 2];
            if !(median > 0.0) {
                return Err(Error::input("samples are degenerate: zero knn distances"));
            }
            dists.iter().map(|&v| (v / median).max(1e-3)).collect()
        }
    };
    Ok(StationaryDensity::Kde(KdeDensity {
        samples: samples.to_owned(),
        base_bandwidths: base,
        point_scales,
        rule,
    }))
}

/// Gaussian component with full covariance (stored with its Cholesky factor).
#[derive(Debug, Clone)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>, // row-major d x d
    chol: Vec<f64>,    // lower-triangular factor, row-major
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::input("covariance must be d x d"));
        }
        let chol = cholesky(&cov, d)?;
        Ok(GaussianSpec { mean, cov, chol })
    }

    pub fn diagonal(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if var.len() != d {
            return Err(Error::input("variance count must match dimension"));
        }
        let mut cov = vec![0.0; d * d];
        for j in 0..d {
            cov[j * d + j] = var[j];
        }
        GaussianSpec::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn ln_eval(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        // solve L z = (x - mean), accumulate |z|^2 and ln det
        let mut z = vec![0.0; d];
        let mut ln_det = 0.0;
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for j in 0..i {
                acc -= self.chol[i * d + j] * z[j];
            }
            let l_ii = self.chol[i * d + i];
            z[i] = acc / l_ii;
            ln_det += l_ii.ln();
        }
        let quad: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * quad - ln_det - 0.5 * d as f64 * LN_2PI
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let mut out = self.mean.clone();
        for i in 0..d {
            for j in 0..=i {
                out[i] += self.chol[i * d + j] * z[j];
            }
        }
        out
    }
}

fn cholesky(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 * cov[i * d + i].abs().max(1.0) {
                return Err(Error::input("covariance must be symmetric"));
            }
            let mut acc = cov[i * d + j];
            for k in 0..j {
                acc -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(acc > 0.0) {
                    return Err(Error::input("covariance must be positive definite"));
                }
                l[i * d + i] = acc.sqrt();
            } else {
                l[i * d + j] = acc / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Initial condition p_0 for a forecast.
#[derive(Debug, Clone)]
pub enum InitialDensity {
    Gaussian(GaussianSpec),
    Mixture(Vec<(f64, GaussianSpec)>),
    /// Alias for the stationary density itself.
    Stationary,
}

impl InitialDensity {
    pub fn mixture(components: Vec<(f64, GaussianSpec)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::input("mixture needs at least one component"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.iter().any(|(w, _)| !(w > &0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::input("mixture weights must be positive and sum to 1"));
        }
        let d = components[0].1.dim();
        if components.iter().any(|(_, g)| g.dim() != d) {
            return Err(Error::input("mixture components must share a dimension"));
        }
        Ok(InitialDensity::Mixture(components))
    }

    pub fn ln_eval(&self, x: &[f64], ps: &StationaryDensity) -> f64 {
        match self {
            InitialDensity::Gaussian(g) => g.ln_eval(x),
            InitialDensity::Mixture(parts) => {
                let terms: Vec<f64> = parts
                    .iter()
                    .map(|(w, g)| w.ln() + g.ln_eval(x))
                    .collect();
                let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
            }
            InitialDensity::Stationary => ps.ln_eval(x),
        }
    }

    pub fn eval(&self, x: &[f64], ps: &StationaryDensity) -> f64 {
        self.ln_eval(x, ps).exp()
    }

    pub fn is_sampleable(&self) -> bool {
        !matches!(self, InitialDensity::Stationary)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            InitialDensity::Gaussian(g) => Ok(g.sample(rng)),
            InitialDensity::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, g) in parts {
                    acc += w;
                    if u <= acc {
                        return Ok(g.sample(rng));
                    }
                }
                Ok(parts.last().unwrap().1.sample(rng))
            }
            InitialDensity::Stationary => Err(Error::input(
                "the stationary initial density is not directly sampleable",
            )),
        }
    }
}
