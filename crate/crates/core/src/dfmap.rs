//! Diffusion-maps baseline: kernel construction, the graph-Laplacian
//! generator estimate, the shift-operator matrix B, and the diffusion
//! forecast that propagates coefficients with powers of B.
//!
//! The kernel is k(x,y) = exp(-|x-y|^2 / (2 eps^2)) with the symmetric
//! density renormalization K_ij = k_ij / sqrt(q_i q_j), followed by the
//! row-stochastic normalization P = D^{-1} K. The generator estimate is
//! L = (P - I)/delta. For this kernel the standard diffusion-maps limit
//! gives delta = eps^2/2; delta = eps reproduces the literal graph-Laplacian
//! scaling. Both are available through [`GeneratorScale`].

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::density::{InitialDensity, StationaryDensity};
use crate::error::{Error, Result};
use crate::linalg::{pairwise_mean, top_k_symmetric_eigen};
use crate::sde::SnapshotPairs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    /// 0.25 x median pairwise distance of a deterministic 2000-point
    /// subsample.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorScale {
    /// delta = eps^2 / 2 (standard limit for this kernel).
    Standard,
    /// delta = eps (literal graph-Laplacian scaling).
    Literal,
}

impl GeneratorScale {
    pub fn delta(&self, epsilon: f64) -> f64 {
        match self {
            GeneratorScale::Standard => 0.5 * epsilon * epsilon,
            GeneratorScale::Literal => epsilon,
        }
    }
}

/// Eigenstructure of the estimated gradient-flow generator at the samples.
#[derive(Debug, Clone)]
pub struct DiffusionMapModel {
    pub samples: Mat<f64>,
    pub epsilon: f64,
    /// Kernel density proxy q_i = sum_j k(x_i, x_j).
    pub q_eps: Vec<f64>,
    /// Generator eigenvalues, k entries, lambda_0 ~ 0 first then descending.
    pub eigvals: Vec<f64>,
    /// M x k eigenfunction values at the samples, unit empirical norm.
    pub eigvecs: Mat<f64>,
    pub generator_scale: f64,
}

impl DiffusionMapModel {
    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn k(&self) -> usize {
        self.eigvals.len()
    }
}

/// Median pairwise distance of an evenly strided subsample, scaled by 0.25.
pub fn auto_epsilon(samples: MatRef<'_, f64>) -> Result<f64> {
    let m = samples.ncols();
    let d = samples.nrows();
    let take = m.min(2000);
    let stride = (m / take).max(1);
    let idx: Vec<usize> = (0..take).map(|i| (i * stride).min(m - 1)).collect();
    let mut dists = Vec::with_capacity(take * (take - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in idx.iter().skip(a + 1) {
            let mut acc = 0.0;
            for r in 0..d {
                let z = samples[(r, i)] - samples[(r, j)];
                acc += z * z;
            }
            dists.push(acc.sqrt());
        }
    }
    if dists.is_empty() {
        return Err(Error::input("need at least two samples for the bandwidth rule"));
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dists[dists.len() / 2];
    if !(median > 0.0) {
        return Err(Error::Bandwidth("samples are all identical".into()));
    }
    Ok(0.25 * median)
}

/// Runs the diffusion-map construction and returns the `k` smallest-decay
/// eigenpairs of the generator estimate.
pub fn diffusion_map(
    samples: MatRef<'_, f64>,
    epsilon: EpsilonRule,
    k: usize,
    scale: GeneratorScale,
) -> Result<DiffusionMapModel> {
    let m = samples.ncols();
    let d = samples.nrows();
    if k == 0 {
        return Err(Error::input("need at least one eigenpair"));
    }
    if m < k + 1 {
        return Err(Error::input(format!(
            "diffusion map needs at least k + 1 = {} samples, got {m}",
            k + 1
        )));
    }
    let eps = match epsilon {
        EpsilonRule::Auto => auto_epsilon(samples)?,
        EpsilonRule::Fixed(e) => {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::input("epsilon must be positive"));
            }
            e
        }
    };
    let inv_two_eps2 = 1.0 / (2.0 * eps * eps);

    // kernel matrix, column-parallel (symmetric)
    let mut kernel = vec![0.0f64; m * m];
    kernel
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(j, col)| {
            for (i, v) in col.iter_mut().enumerate() {
                let mut acc = 0.0;
                for r in 0..d {
                    let z = samples[(r, i)] - samples[(r, j)];
                    acc += z * z;
                }
                *v = (-acc * inv_two_eps2).exp();
            }
        });

    // q_i = sum_j k_ij
    let q: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| kernel[j * m + i]).sum())
        .collect();

    // renormalized kernel K_ij = k_ij / sqrt(q_i q_j), in place
    let inv_sqrt_q: Vec<f64> = q.iter().map(|&v| 1.0 / v.sqrt()).collect();
    kernel
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(j, col)| {
            let sj = inv_sqrt_q[j];
            for (i, v) in col.iter_mut().enumerate() {
                *v *= inv_sqrt_q[i] * sj;
            }
        });

    // row sums D_i of K, plus bandwidth sanity on P = D^{-1} K
    let dsum: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| kernel[j * m + i]).sum())
        .collect();
    let mut max_offdiag_mass = 0.0f64;
    let mut max_row_spread = 0.0f64;
    for i in 0..m {
        let diag = kernel[i * m + i];
        let off = (dsum[i] - diag) / dsum[i];
        if off > max_offdiag_mass {
            max_offdiag_mass = off;
        }
        let mut row_min = f64::INFINITY;
        let mut row_max = f64::NEG_INFINITY;
        for j in 0..m {
            let p = kernel[j * m + i] / dsum[i];
            row_min = row_min.min(p);
            row_max = row_max.max(p);
        }
        max_row_spread = max_row_spread.max(row_max - row_min);
    }
    if max_offdiag_mass < 1e-12 {
        return Err(Error::Bandwidth(format!(
            "epsilon = {eps:.3e} is so small that the transition matrix is numerically the identity"
        )));
    }
    if max_row_spread < 1e-12 {
        return Err(Error::Bandwidth(format!(
            "epsilon = {eps:.3e} is so large that the transition rows are numerically uniform"
        )));
    }

    // symmetric conjugation S = D^{-1/2} K D^{-1/2}, sharing P's spectrum
    let inv_sqrt_d: Vec<f64> = dsum.iter().map(|&v| 1.0 / v.sqrt()).collect();
    kernel
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(j, col)| {
            let sj = inv_sqrt_d[j];
            for (i, v) in col.iter_mut().enumerate() {
                *v *= inv_sqrt_d[i] * sj;
            }
        });
    let s_mat = faer::MatRef::from_column_major_slice(&kernel, m, m);

    let iterations = if k <= 64 { 12 } else { 2 };
    let (s_vals, u) = top_k_symmetric_eigen(s_mat, k, iterations, 0x5eed_d1f5)?;
    drop(kernel);

    // eigenvectors of P: v = D^{-1/2} u, normalized to unit empirical norm,
    // sign fixed by the largest-magnitude component
    let delta = scale.delta(eps);
    let mut eigvecs = Mat::<f64>::zeros(m, k);
    for c in 0..k {
        let mut col: Vec<f64> = (0..m).map(|r| u[(r, c)] * inv_sqrt_d[r]).collect();
        let norm = (pairwise_mean(&col.iter().map(|v| v * v).collect::<Vec<_>>())).sqrt();
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_mag + 1e-15 {
                best = i;
                best_mag = v.abs();
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for v in col.iter_mut() {
            *v *= sign / norm;
        }
        for (r, v) in col.iter().enumerate() {
            eigvecs[(r, c)] = *v;
        }
    }
    let eigvals: Vec<f64> = s_vals.iter().map(|&s| (s - 1.0) / delta).collect();

    Ok(DiffusionMapModel {
        samples: samples.to_owned(),
        epsilon: eps,
        q_eps: q,
        eigvals,
        eigvecs,
        generator_scale: delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupMode {
    /// Pair points must coincide bitwise with training samples; a single
    /// trailing unmatched pair (the end of a single-trajectory series) is
    /// dropped from the average.
    Exact,
    /// Nearest training sample by Euclidean distance.
    Nearest,
}

/// Shift-operator estimate B_kj = mean over pairs of phi_j(x_m) phi_k(y_m),
/// with eigenfunction values at the y points obtained by sample lookup.
pub fn df_shift_matrix(
    dm: &DiffusionMapModel,
    pairs: &SnapshotPairs,
    mode: LookupMode,
) -> Result<Mat<f64>> {
    let m = dm.n_samples();
    let d = dm.samples.nrows();
    if pairs.dim() != d || pairs.len() != m {
        return Err(Error::input(
            "shift matrix needs the pairs the diffusion map was trained on",
        ));
    }
    for c in 0..m {
        for r in 0..d {
            if pairs.x[(r, c)] != dm.samples[(r, c)] {
                return Err(Error::input(
                    "pairs.x must be the diffusion map training samples",
                ));
            }
        }
    }
    let y_index: Vec<Option<usize>> = match mode {
        LookupMode::Exact => {
            use std::collections::HashMap;
            let mut map: HashMap<Vec<u64>, usize> = HashMap::with_capacity(m);
            for c in 0..m {
                let key: Vec<u64> = (0..d).map(|r| dm.samples[(r, c)].to_bits()).collect();
                map.insert(key, c);
            }
            (0..m)
                .map(|c| {
                    let key: Vec<u64> = (0..d).map(|r| pairs.y[(r, c)].to_bits()).collect();
                    map.get(&key).copied()
                })
                .collect()
        }
        LookupMode::Nearest => (0..m)
            .into_par_iter()
            .map(|c| {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for i in 0..m {
                    let mut acc = 0.0;
                    for r in 0..d {
                        let z = pairs.y[(r, c)] - dm.samples[(r, i)];
                        acc += z * z;
                    }
                    if acc < best_d {
                        best_d = acc;
                        best = i;
                    }
                }
                Some(best)
            })
            .collect(),
    };
    let unmatched = y_index.iter().filter(|v| v.is_none()).count();
    if unmatched > 1 {
        let first = y_index.iter().position(|v| v.is_none()).unwrap();
        return Err(Error::input(format!(
            "{unmatched} pair points (first at column {first}) do not match any training sample in exact-lookup mode"
        )));
    }
    let matched: Vec<(usize, usize)> = y_index
        .iter()
        .enumerate()
        .filter_map(|(c, idx)| idx.map(|i| (c, i)))
        .collect();
    if matched.is_empty() {
        return Err(Error::input("no pair points matched the training samples"));
    }
    let k = dm.k();
    let count = matched.len() as f64;
    let mut b = Mat::<f64>::zeros(k, k);
    for kk in 0..k {
        for jj in 0..k {
            let mut acc = 0.0;
            for &(c, yi) in &matched {
                acc += dm.eigvecs[(c, jj)] * dm.eigvecs[(yi, kk)];
            }
            b[(kk, jj)] = acc / count;
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfCoefficientWeight {
    /// Importance-sampled: c_j(0) = (1/M) sum p_0(x_i) phi_j(x_i) / p_s(x_i).
    ImportanceWeighted,
    /// Literal estimator without the stationary-density weight.
    Unweighted,
}

/// Initial diffusion-forecast coefficients from the training samples.
pub fn df_coefficients(
    dm: &DiffusionMapModel,
    ps: &StationaryDensity,
    p0: &InitialDensity,
    weight: DfCoefficientWeight,
) -> Result<Vec<f64>> {
    let m = dm.n_samples();
    let d = dm.samples.nrows();
    let mut point = vec![0.0; d];
    let mut w = vec![0.0f64; m];
    for (c, wv) in w.iter_mut().enumerate() {
        for r in 0..d {
            point[r] = dm.samples[(r, c)];
        }
        *wv = match weight {
            DfCoefficientWeight::ImportanceWeighted => {
                if matches!(p0, InitialDensity::Stationary) {
                    1.0
                } else {
                    let ln_ps = ps.ln_eval(&point);
                    if ln_ps < crate::density::PS_FLOOR.ln() {
                        return Err(Error::DegenerateWeight {
                            sample: c,
                            value: ln_ps.exp(),
                        });
                    }
                    (p0.ln_eval(&point, ps) - ln_ps).exp()
                }
            }
            DfCoefficientWeight::Unweighted => p0.eval(&point, ps),
        };
    }
    let k = dm.k();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let terms: Vec<f64> = (0..m).map(|c| w[c] * dm.eigvecs[(c, j)]).collect();
        out.push(pairwise_mean(&terms));
    }
    Ok(out)
}

/// A fitted diffusion-forecast model. `b` is the one-step shift operator, so
/// forecast times are integer multiples of `dt`.
#[derive(Debug, Clone)]
pub struct DfModel {
    pub dm: DiffusionMapModel,
    pub b: Mat<f64>,
    pub c0_hat: Vec<f64>,
    pub dt: f64,
}

impl DfModel {
    pub fn new(dm: DiffusionMapModel, b: Mat<f64>, c0_hat: Vec<f64>, dt: f64) -> Result<Self> {
        if b.nrows() != dm.k() || b.ncols() != dm.k() || c0_hat.len() != dm.k() {
            return Err(Error::input("shift matrix and coefficients must be k x k and k"));
        }
        if !(dt > 0.0) {
            return Err(Error::input("dt must be positive"));
        }
        Ok(DfModel { dm, b, c0_hat, dt })
    }

    /// Number of shift steps for a forecast time; the time must be an
    /// integer multiple of dt.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        if t < 0.0 {
            return Err(Error::input("forecast time must be nonnegative"));
        }
        let n = (t / self.dt).round();
        if (t - n * self.dt).abs() > 1e-9 * t.abs().max(self.dt) {
            return Err(Error::input(format!(
                "forecast time {t} is not an integer multiple of the snapshot interval {}",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    /// c(t) = B^n c(0).
    pub fn coefficients_after(&self, n_steps: usize) -> Vec<f64> {
        let k = self.dm.k();
        let mut c = self.c0_hat.clone();
        for _ in 0..n_steps {
            let mut next = vec![0.0f64; k];
            for (row, nv) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for col in 0..k {
                    acc += self.b[(row, col)] * c[col];
                }
                *nv = acc;
            }
            c = next;
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct DfForecast {
    /// Density values at the training samples.
    pub density_at_samples: Vec<f64>,
    pub coefficients: Vec<f64>,
}

/// Diffusion forecast after `n_steps` shift steps: density at sample x_m is
/// sum_k c_k(t) phi_k(x_m) p_s(x_m).
pub fn df_forecast(model: &DfModel, ps: &StationaryDensity, n_steps: usize) -> Result<DfForecast> {
    let coeffs = model.coefficients_after(n_steps);
    let m = model.dm.n_samples();
    let ps_vals = ps.eval_columns(model.dm.samples.as_ref());
    let mut density = vec![0.0f64; m];
    for (i, dv) in density.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            acc += c * model.dm.eigvecs[(i, k)];
        }
        *dv = acc * ps_vals[i];
    }
    Ok(DfForecast {
        density_at_samples: density,
        coefficients: coeffs,
    })
}

/// Expectation forecast under the diffusion model:
/// E[g](n) = sum_k c_k(n) (1/M) sum_m g(x_m) phi_k(x_m).
pub fn df_expectation(model: &DfModel, g: &dyn Fn(&[f64]) -> f64, n_steps: usize) -> f64 {
    let m = model.dm.n_samples();
    let d = model.dm.samples.nrows();
    let mut point = vec![0.0; d];
    let mut g_vals = vec![0.0f64; m];
    for (c, gv) in g_vals.iter_mut().enumerate() {
        for r in 0..d {
            point[r] = model.dm.samples[(r, c)];
        }
        *gv = g(&point);
    }
    let coeffs = model.coefficients_after(n_steps);
    let mut acc = 0.0;
    for (k, c) in coeffs.iter().enumerate() {
        let terms: Vec<f64> = (0..m).map(|i| g_vals[i] * model.dm.eigvecs[(i, k)]).collect();
        acc += c * pairwise_mean(&terms);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_samples(m: usize, seed: u64) -> Mat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::<f64>::from_fn(1, m, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn transition_rows_are_stochastic() {
        // rebuild P explicitly on a small sample set and check row sums
        let m = 300;
        let samples = normal_samples(m, 3);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 4, GeneratorScale::Standard).unwrap();
        let eps = dm.epsilon;
        let mut kernel = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..m {
                let z = samples[(0, i)] - samples[(0, j)];
                kernel[j * m + i] = (-z * z / (2.0 * eps * eps)).exp();
            }
        }
        let q: Vec<f64> = (0..m).map(|i| (0..m).map(|j| kernel[j * m + i]).sum()).collect();
        for j in 0..m {
            for i in 0..m {
                kernel[j * m + i] /= (q[i] * q[j]).sqrt();
            }
        }
        let dsum: Vec<f64> = (0..m).map(|i| (0..m).map(|j| kernel[j * m + i]).sum()).collect();
        for i in 0..m {
            let row_sum: f64 = (0..m).map(|j| kernel[j * m + i] / dsum[i]).sum();
            assert!((row_sum - 1.0).abs() < 1e-12);
            for j in 0..m {
                assert!(kernel[j * m + i] >= 0.0);
            }
        }
        // q_eps stored by the model matches the kernel degree
        for i in 0..m {
            assert!((dm.q_eps[i] - q[i]).abs() < 1e-9 * q[i]);
        }
    }

    #[test]
    fn constant_mode_has_zero_eigenvalue() {
        let samples = normal_samples(500, 5);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 3, GeneratorScale::Standard).unwrap();
        assert!(dm.eigvals[0].abs() < 1e-8, "lambda0 = {}", dm.eigvals[0]);
        // eigenvector is constant across samples
        let v0: Vec<f64> = (0..dm.n_samples()).map(|i| dm.eigvecs[(i, 0)]).collect();
        let mean = v0.iter().sum::<f64>() / v0.len() as f64;
        for v in &v0 {
            assert!((v - mean).abs() < 1e-6, "constant mode varies: {v} vs {mean}");
        }
        // decays are non-positive up to numerical noise
        for l in &dm.eigvals {
            assert!(*l <= 1e-8);
        }
        // unit empirical norms
        for c in 0..dm.k() {
            let ms: f64 = (0..dm.n_samples()).map(|i| dm.eigvecs[(i, c)].powi(2)).sum::<f64>()
                / dm.n_samples() as f64;
            assert!((ms - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ou_spectrum_ratio() {
        // generator eigenvalues of the N(0,1) gradient flow are -k, so
        // lambda_2/lambda_1 ~ 2
        let samples = normal_samples(4_000, 7);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 3, GeneratorScale::Standard).unwrap();
        let ratio = dm.eigvals[2] / dm.eigvals[1];
        assert!((1.6..=2.4).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn eigenvector_empirical_orthonormality() {
        let m = 4_000;
        let samples = normal_samples(m, 9);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 5, GeneratorScale::Standard).unwrap();
        let bound = 5.0 / (m as f64).sqrt();
        for a in 0..dm.k() {
            for b in 0..a {
                let inner: f64 = (0..m).map(|i| dm.eigvecs[(i, a)] * dm.eigvecs[(i, b)]).sum::<f64>()
                    / m as f64;
                assert!(inner.abs() < bound, "<v{a}, v{b}> = {inner}");
            }
        }
    }

    #[test]
    fn bandwidth_extremes_are_rejected() {
        let samples = normal_samples(60, 11);
        let tiny = diffusion_map(samples.as_ref(), EpsilonRule::Fixed(1e-9), 2, GeneratorScale::Standard);
        assert!(matches!(tiny, Err(Error::Bandwidth(_))), "{tiny:?}");
        let huge = diffusion_map(samples.as_ref(), EpsilonRule::Fixed(1e9), 2, GeneratorScale::Standard);
        assert!(matches!(huge, Err(Error::Bandwidth(_))), "{huge:?}");
    }

    #[test]
    fn literal_scale_rescales_eigenvalues() {
        let samples = normal_samples(800, 13);
        let std = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 3, GeneratorScale::Standard).unwrap();
        let lit = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 3, GeneratorScale::Literal).unwrap();
        // same spectrum of P, eigenvalues divided by delta = eps^2/2 vs eps
        let expect = std.generator_scale / lit.generator_scale;
        let got = lit.eigvals[1] / std.eigvals[1];
        assert!((got - expect).abs() < 1e-9 * expect.abs(), "{got} vs {expect}");
    }

    fn shifted_pairs(samples: &Mat<f64>) -> SnapshotPairs {
        // single-trajectory structure: y_m = x_{m+1}, last y exits the set
        let m = samples.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let y = Mat::<f64>::from_fn(1, m, |_, c| {
            if c + 1 < m {
                samples[(0, c + 1)]
            } else {
                let z: f64 = StandardNormal.sample(&mut rng);
                samples[(0, c)] + z
            }
        });
        SnapshotPairs {
            x: samples.clone(),
            y,
            dt: 0.25,
            source_seed: None,
        }
    }

    #[test]
    fn identity_dynamics_shift_is_near_identity() {
        let m = 2_000;
        let samples = normal_samples(m, 15);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 4, GeneratorScale::Standard).unwrap();
        let pairs = SnapshotPairs {
            x: samples.clone(),
            y: samples.clone(),
            dt: 0.1,
            source_seed: None,
        };
        let b = df_shift_matrix(&dm, &pairs, LookupMode::Exact).unwrap();
        let bound = 5.0 / (m as f64).sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((b[(i, j)] - target).abs() < bound.max(1e-9), "B[{i},{j}] = {}", b[(i, j)]);
            }
        }
    }

    #[test]
    fn single_mode_shift_is_one() {
        let samples = normal_samples(500, 17);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 1, GeneratorScale::Standard).unwrap();
        let pairs = shifted_pairs(&samples);
        let b = df_shift_matrix(&dm, &pairs, LookupMode::Exact).unwrap();
        assert!((b[(0, 0)] - 1.0).abs() < 1e-10, "B = {}", b[(0, 0)]);
    }

    #[test]
    fn exact_lookup_rejects_foreign_points() {
        let samples = normal_samples(200, 19);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 2, GeneratorScale::Standard).unwrap();
        let y = Mat::<f64>::from_fn(1, 200, |_, c| samples[(0, c)] + 0.123);
        let pairs = SnapshotPairs {
            x: samples.clone(),
            y,
            dt: 0.1,
            source_seed: None,
        };
        assert!(df_shift_matrix(&dm, &pairs, LookupMode::Exact).is_err());
        // nearest mode accepts them
        assert!(df_shift_matrix(&dm, &pairs, LookupMode::Nearest).is_ok());
    }

    #[test]
    fn stationary_p0_forecast_returns_ps() {
        let m = 2_000;
        let samples = normal_samples(m, 21);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 5, GeneratorScale::Standard).unwrap();
        let pairs = shifted_pairs(&samples);
        let b = df_shift_matrix(&dm, &pairs, LookupMode::Exact).unwrap();
        let ps = StationaryDensity::standard_gaussian(1);
        let c0 = df_coefficients(&dm, &ps, &InitialDensity::Stationary, DfCoefficientWeight::ImportanceWeighted).unwrap();
        let model = DfModel::new(dm, b, c0, pairs.dt).unwrap();
        let fc = df_forecast(&model, &ps, 0).unwrap();
        let bound = 5.0 / (m as f64).sqrt();
        let ps_vals = ps.eval_columns(model.dm.samples.as_ref());
        let mut worst: f64 = 0.0;
        for (got, want) in fc.density_at_samples.iter().zip(&ps_vals) {
            if *want > 1e-3 {
                worst = worst.max((got - want).abs() / want);
            }
        }
        assert!(worst < 3.0 * bound.max(0.05), "worst rel err = {worst}");
    }

    #[test]
    fn forecast_times_must_be_step_multiples() {
        let samples = normal_samples(200, 23);
        let dm = diffusion_map(samples.as_ref(), EpsilonRule::Auto, 2, GeneratorScale::Standard).unwrap();
        let pairs = shifted_pairs(&samples);
        let b = df_shift_matrix(&dm, &pairs, LookupMode::Exact).unwrap();
        let ps = StationaryDensity::standard_gaussian(1);
        let c0 = df_coefficients(&dm, &ps, &InitialDensity::Stationary, DfCoefficientWeight::ImportanceWeighted).unwrap();
        let model = DfModel::new(dm, b, c0, 0.25).unwrap();
        assert_eq!(model.steps_for(1.0).unwrap(), 4);
        assert!(model.steps_for(0.3).is_err());
    }
}
