//! EDMD in the invariant-measure-weighted space: Gram matrices from
//! stationary snapshots, the Koopman matrix K = A G^+, and the generator
//! spectrum obtained through lambda = log(mu)/dt.
//!
//! Because the snapshots are drawn from the stationary density, the sample
//! averages behind G and A estimate weighted inner products
//! <f, g>_{p_s} ~ (1/M) sum f(x_m) g(x_m), so the left eigenvectors of K
//! yield eigenfunctions phi_i = xi_i^T psi that are orthonormal in the
//! empirical weighted norm.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::dict::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum_complex, pinv};
use crate::sde::SnapshotPairs;

pub const DEFAULT_PINV_RTOL: f64 = 1e-10;

/// Empirical Gram matrices G = (1/M) psi(X) psi(X)^T (symmetrized) and
/// A = (1/M) psi(Y) psi(X)^T.
#[derive(Debug, Clone)]
pub struct GramPair {
    pub g: Mat<f64>,
    pub a: Mat<f64>,
    pub m: usize,
}

/// Assembles the Gram pair from snapshot-matrix evaluations. The column
/// reduction uses a fixed pairwise blocking, so results do not depend on
/// thread count.
pub fn assemble_grams(psi_x: MatRef<'_, f64>, psi_y: MatRef<'_, f64>) -> Result<GramPair> {
    if psi_x.nrows() != psi_y.nrows() || psi_x.ncols() != psi_y.ncols() {
        return Err(Error::input(format!(
            "snapshot matrices must have matching shapes, got {}x{} and {}x{}",
            psi_x.nrows(),
            psi_x.ncols(),
            psi_y.nrows(),
            psi_y.ncols()
        )));
    }
    let m = psi_x.ncols();
    if m == 0 {
        return Err(Error::input("empty snapshot matrices"));
    }
    let g_raw = pairwise_outer(psi_x, psi_x);
    let a = scale(&pairwise_outer(psi_y, psi_x), 1.0 / m as f64);
    let n = psi_x.nrows();
    let g = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (g_raw[(i, j)] + g_raw[(j, i)]) / m as f64);
    Ok(GramPair { g, a, m })
}

fn scale(a: &Mat<f64>, s: f64) -> Mat<f64> {
    Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// sum over columns of u_col * v_col^T with pairwise recursion on the column
/// range (not yet divided by M).
fn pairwise_outer(u: MatRef<'_, f64>, v: MatRef<'_, f64>) -> Mat<f64> {
    fn go(u: MatRef<'_, f64>, v: MatRef<'_, f64>, lo: usize, hi: usize) -> Mat<f64> {
        let n = u.nrows();
        if hi - lo <= 256 {
            let mut acc = Mat::<f64>::zeros(n, n);
            for c in lo..hi {
                for i in 0..n {
                    let ui = u[(i, c)];
                    for j in 0..n {
                        acc[(i, j)] += ui * v[(j, c)];
                    }
                }
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        let left = go(u, v, lo, mid);
        let right = go(u, v, mid, hi);
        let mut out = left;
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += right[(i, j)];
            }
        }
        out
    }
    go(u, v, 0, u.ncols())
}

/// K = A G^+ with the pseudoinverse truncated at rtol * sigma_max; returns
/// the effective rank of G.
pub fn koopman_matrix(grams: &GramPair, rtol: f64) -> Result<(Mat<f64>, usize)> {
    let (g_pinv, rank) = pinv(grams.g.as_ref(), rtol).map_err(|e| match e {
        Error::Degenerate(_) => Error::Degenerate("gram matrix G is identically zero".into()),
        other => other,
    })?;
    Ok((&grams.a * &g_pinv, rank))
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    /// max |Im(lambda_i)| over all modes.
    pub max_imag: f64,
    /// Some |mu_i| exceeded 1 + 1e-6 (non-contractive mode present).
    pub non_contractive: bool,
    /// Some mu_i lay on the negative real axis, so Im(lambda) = pi/dt.
    pub negative_real_mu: bool,
}

/// Koopman matrix plus its left-eigenpair decomposition mapped to generator
/// eigenvalues. Modes are sorted by Re(lambda) descending (ties by |Im|
/// ascending); eigenvectors are scaled to unit empirical weighted norm on the
/// training snapshots with the largest-magnitude component made real and
/// positive.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    pub k: Mat<f64>,
    pub dt: f64,
    pub mu: Vec<Complex64>,
    pub lambda: Vec<Complex64>,
    /// Left eigenvectors, one row per mode.
    pub xi: Vec<Vec<Complex64>>,
    pub dict: Dictionary,
    pub rank: usize,
    pub diagnostics: Diagnostics,
}

impl KoopmanModel {
    pub fn n_modes(&self) -> usize {
        self.mu.len()
    }

    pub fn dim_state(&self) -> usize {
        self.dict.dim_state()
    }

    /// Indices of modes with Re(lambda) > 1e-6 (flagged as unstable).
    pub fn unstable_modes(&self) -> Vec<usize> {
        self.lambda
            .iter()
            .enumerate()
            .filter(|(_, l)| l.re > 1e-6)
            .map(|(i, _)| i)
            .collect()
    }

    /// phi_i values for all modes on already-evaluated snapshots (N x M),
    /// one row per mode.
    pub fn eigenfunctions_on(&self, psi: MatRef<'_, f64>) -> Vec<Vec<Complex64>> {
        self.xi
            .iter()
            .map(|xi| eigenfunction_values(xi, psi))
            .collect()
    }
}

fn eigenfunction_values(xi: &[Complex64], psi: MatRef<'_, f64>) -> Vec<Complex64> {
    let m = psi.ncols();
    let n = psi.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (j, &coef) in xi.iter().enumerate().take(n) {
        for (c, o) in out.iter_mut().enumerate() {
            *o += coef * psi[(j, c)];
        }
    }
    out
}

/// Left-eigendecomposition of K with generator eigenvalues
/// lambda_i = log(mu_i)/dt (principal branch).
pub fn eigendecompose(
    k: Mat<f64>,
    dt: f64,
    dict: Dictionary,
    psi_x: MatRef<'_, f64>,
    rank: usize,
) -> Result<KoopmanModel> {
    if k.nrows() != k.ncols() {
        return Err(Error::input("Koopman matrix must be square"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input("dt must be positive"));
    }
    let n = k.nrows();
    if dict.n_obs() != n || psi_x.nrows() != n {
        return Err(Error::input(
            "dictionary size, Koopman matrix, and snapshot evaluations disagree",
        ));
    }
    let m = psi_x.ncols();
    // left eigenvectors of K = right eigenvectors of K^T
    let kt = k.transpose().to_owned();
    let evd = kt
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let vals = evd.S();
    let vecs = evd.U();

    let mut modes: Vec<(Complex64, Complex64, Vec<Complex64>)> = Vec::with_capacity(n);
    let mut diagnostics = Diagnostics::default();
    for i in 0..n {
        let mu: Complex64 = vals[i];
        let mut xi: Vec<Complex64> = (0..n).map(|r| vecs[(r, i)]).collect();
        // When the dictionary holds the constant and G has full rank,
        // (1, e_1) is an exact eigenpair (the first rows of A and G
        // coincide); clear the solver roundoff on the eigenvector so the
        // constant eigenfunction is identically one.
        if dict.has_constant() && (mu - Complex64::new(1.0, 0.0)).norm() < 1e-8 {
            let lead = xi[0].norm();
            if lead > 0.0 {
                let near_e1 = xi
                    .iter()
                    .skip(1)
                    .all(|v| v.norm() < 1e-6 * lead);
                if near_e1 {
                    xi.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    xi[0] = Complex64::new(1.0, 0.0);
                }
            }
        }
        // unit empirical weighted norm over the training snapshots
        let phi = eigenfunction_values(&xi, psi_x);
        let norm_sq = phi.iter().map(|v| v.norm_sqr()).sum::<f64>() / m as f64;
        if !(norm_sq > 0.0) {
            return Err(Error::Numerical(format!(
                "eigenfunction {i} vanishes on the training data"
            )));
        }
        let scale = 1.0 / norm_sq.sqrt();
        for v in xi.iter_mut() {
            *v *= scale;
        }
        // phase: largest-magnitude component real and positive
        let (mut best, mut best_mag) = (0usize, -1.0f64);
        for (j, v) in xi.iter().enumerate() {
            let mag = v.norm();
            if mag > best_mag + 1e-15 {
                best = j;
                best_mag = mag;
            }
        }
        let phase = xi[best] / xi[best].norm();
        let phase_conj = phase.conj();
        for v in xi.iter_mut() {
            *v *= phase_conj;
        }

        if mu.norm() > 1.0 + 1e-6 {
            diagnostics.non_contractive = true;
        }
        if mu.im == 0.0 && mu.re < 0.0 {
            diagnostics.negative_real_mu = true;
        }
        let lambda = Complex64::new(mu.norm().ln() / dt, mu.arg() / dt);
        modes.push((mu, lambda, xi));
    }
    modes.sort_by(|a, b| {
        b.1.re
            .partial_cmp(&a.1.re)
            .unwrap()
            .then(a.1.im.abs().partial_cmp(&b.1.im.abs()).unwrap())
    });
    diagnostics.max_imag = modes
        .iter()
        .map(|(_, l, _)| l.im.abs())
        .fold(0.0f64, f64::max);

    let mu = modes.iter().map(|m| m.0).collect();
    let lambda = modes.iter().map(|m| m.1).collect();
    let xi = modes.into_iter().map(|m| m.2).collect();
    Ok(KoopmanModel {
        k,
        dt,
        mu,
        lambda,
        xi,
        dict,
        rank,
        diagnostics,
    })
}

/// Evaluates the i-th eigenfunction phi_i(x) = xi_i^T psi(x) on a state
/// matrix.
pub fn eval_eigenfunction(
    model: &KoopmanModel,
    index: usize,
    x: MatRef<'_, f64>,
) -> Result<Vec<Complex64>> {
    if index >= model.n_modes() {
        return Err(Error::input(format!(
            "eigenfunction index {index} out of range (N = {})",
            model.n_modes()
        )));
    }
    let psi = model.dict.eval_matrix(x)?;
    Ok(eigenfunction_values(&model.xi[index], psi.as_ref()))
}

/// Empirical weighted inner product (1/M) sum f_m conj(g_m); returns the real
/// part and the imaginary residual.
pub fn empirical_inner(f: &[Complex64], g: &[Complex64]) -> Result<(f64, f64)> {
    if f.is_empty() || f.len() != g.len() {
        return Err(Error::input(format!(
            "inner product needs equal nonzero lengths, got {} and {}",
            f.len(),
            g.len()
        )));
    }
    let prods: Vec<Complex64> = f.iter().zip(g).map(|(a, b)| a * b.conj()).collect();
    let total = pairwise_sum_complex(&prods) / prods.len() as f64;
    Ok((total.re, total.im))
}

/// Full fitting pipeline: evaluate the dictionary on the pairs, assemble the
/// Gram matrices, form K = A G^+, and eigendecompose.
pub fn fit_koopman(pairs: &SnapshotPairs, dict: Dictionary, rtol: f64) -> Result<KoopmanModel> {
    pairs.validate()?;
    let psi_x = dict.eval_matrix(pairs.x.as_ref())?;
    let psi_y = dict.eval_matrix(pairs.y.as_ref())?;
    let grams = assemble_grams(psi_x.as_ref(), psi_y.as_ref())?;
    let (k, rank) = koopman_matrix(&grams, rtol)?;
    eigendecompose(k, pairs.dt, dict, psi_x.as_ref(), rank)
}
