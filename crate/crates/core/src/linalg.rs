//! Small numerical helpers shared across modules: deterministic pairwise
//! summation, the truncated-SVD pseudoinverse, and a randomized top-k
//! eigensolver for large symmetric matrices.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Pairwise (cascade) summation; deterministic and more accurate than a
/// running sum for long inputs.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// Pairwise mean.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Moore-Penrose pseudoinverse via SVD, truncating singular values below
/// rtol * sigma_max. Returns the pseudoinverse and the retained rank.
pub fn pinv(a: MatRef<'_, f64>, rtol: f64) -> Result<(Mat<f64>, usize)> {
    let svd = a
        .svd()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let s = svd.S();
    let (m, n) = (a.nrows(), a.ncols());
    let k = m.min(n);
    let smax = if k > 0 { s[0] } else { 0.0 };
    if !(smax > 0.0) {
        return Err(Error::Degenerate("matrix is identically zero".into()));
    }
    let tol = rtol * smax;
    let rank = (0..k).take_while(|&i| s[i] > tol).count();
    // pinv = V_r diag(1/s) U_r^T
    let u = svd.U();
    let v = svd.V();
    let mut out = Mat::<f64>::zeros(n, m);
    for r in 0..rank {
        let inv = 1.0 / s[r];
        for i in 0..n {
            let vi = v[(i, r)] * inv;
            for j in 0..m {
                out[(i, j)] += vi * u[(j, r)];
            }
        }
    }
    Ok((out, rank))
}

/// Top-k eigenpairs of a symmetric matrix, eigenvalues descending.
///
/// Uses a dense solve for small matrices and randomized subspace iteration
/// with Rayleigh-Ritz extraction for large ones. The random block is seeded
/// deterministically.
pub fn top_k_symmetric_eigen(s: MatRef<'_, f64>, k: usize, iterations: usize, seed: u64) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::input("matrix must be square"));
    }
    if k == 0 || k > n {
        return Err(Error::input(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    // generous oversampling for small blocks; Ritz values of tightly
    // clustered kernel spectra converge slowly otherwise
    let oversample = (2 * k).clamp(10, 100);
    let block = (k + oversample).min(n);
    if n <= 1500 || block * 2 >= n {
        return dense_top_k(s, k);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Mat::<f64>::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    q = thin_q(&(s * &q));
    for _ in 0..iterations {
        q = thin_q(&(s * &q));
    }
    // Rayleigh-Ritz on the subspace
    let sq = s * &q;
    let b = q.transpose() * &sq;
    let b = symmetrize(&b);
    let eig = b
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("projected eigensolve failed: {e:?}")))?;
    let evals = eig.S();
    let evecs = eig.U();
    let mut order: Vec<usize> = (0..block).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
    let vals: Vec<f64> = order.iter().take(k).map(|&i| evals[i]).collect();
    let w_top = Mat::<f64>::from_fn(block, k, |r, c| evecs[(r, order[c])]);
    let vecs = &q * &w_top;
    Ok((vals, vecs))
}

fn dense_top_k(s: MatRef<'_, f64>, k: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = s.nrows();
    let eig = symmetrize_ref(s)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolve failed: {e:?}")))?;
    let evals = eig.S();
    let evecs = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
    let vals: Vec<f64> = order.iter().take(k).map(|&i| evals[i]).collect();
    let vecs = Mat::<f64>::from_fn(n, k, |r, c| evecs[(r, order[c])]);
    Ok((vals, vecs))
}

fn thin_q(a: &Mat<f64>) -> Mat<f64> {
    a.qr().compute_thin_Q()
}

fn symmetrize(a: &Mat<f64>) -> Mat<f64> {
    Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn symmetrize_ref(a: MatRef<'_, f64>) -> Mat<f64> {
    Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
    }

    #[test]
    fn pinv_full_rank_inverts() {
        let a = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
        let (p, rank) = pinv(a.as_ref(), 1e-12).unwrap();
        assert_eq!(rank, 3);
        let prod = &a * &p;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_rank_deficient() {
        // rank-1 outer product (1,2)(1,2)^T
        let a = Mat::<f64>::from_fn(2, 2, |i, j| ((i + 1) * (j + 1)) as f64);
        let (p, rank) = pinv(a.as_ref(), 1e-10).unwrap();
        assert_eq!(rank, 1);
        // A pinv(A) A = A
        let back = &a * &p * &a;
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_zero_matrix_is_degenerate() {
        let a = Mat::<f64>::zeros(2, 2);
        assert!(pinv(a.as_ref(), 1e-10).is_err());
    }

    #[test]
    fn randomized_eigen_matches_dense() {
        // symmetric with a decaying spectrum (the kernel-matrix regime)
        let n = 2000usize;
        let k = 6usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = Mat::<f64>::from_fn(n, 40, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let q_basis = raw.qr().compute_thin_Q();
        let mut s = Mat::<f64>::zeros(n, n);
        for mode in 0..40 {
            let w = 2.0f64.powi(-(mode as i32)) + 1e-6;
            for i in 0..n {
                let qi = q_basis[(i, mode)] * w;
                for j in 0..n {
                    s[(i, j)] += qi * q_basis[(j, mode)];
                }
            }
        }
        let (dense_vals, _) = dense_top_k(s.as_ref(), k).unwrap();
        // force the randomized path by passing through the public API on a
        // larger-than-threshold copy is awkward; call internals directly
        let (vals, vecs) = {
            let mut rng = ChaCha8Rng::seed_from_u64(1234);
            let block = k + 10;
            let mut q = Mat::<f64>::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
            q = thin_q(&(&s * &q));
            for _ in 0..8 {
                q = thin_q(&(&s * &q));
            }
            let sq = &s * &q;
            let proj = symmetrize(&(q.transpose() * &sq));
            let eig = proj.self_adjoint_eigen(Side::Lower).unwrap();
            let evals = eig.S();
            let evecs = eig.U();
            let mut order: Vec<usize> = (0..block).collect();
            order.sort_by(|&i, &j| evals[j].partial_cmp(&evals[i]).unwrap());
            let vals: Vec<f64> = order.iter().take(k).map(|&i| evals[i]).collect();
            let mut vecs = Mat::<f64>::zeros(n, k);
            for (col, &oi) in order.iter().take(k).enumerate() {
                for row in 0..n {
                    let mut acc = 0.0;
                    for bi in 0..block {
                        acc += q[(row, bi)] * evecs[(bi, oi)];
                    }
                    vecs[(row, col)] = acc;
                }
            }
            (vals, vecs)
        };
        for i in 0..k {
            assert!(
                (vals[i] - dense_vals[i]).abs() < 1e-8 * dense_vals[0],
                "eigval {i}: {} vs {}",
                vals[i],
                dense_vals[i]
            );
        }
        // residual check ||S v - lambda v||
        for c in 0..k {
            let v = Mat::<f64>::from_fn(n, 1, |r, _| vecs[(r, c)]);
            let sv = &s * &v;
            let mut resid: f64 = 0.0;
            for r in 0..n {
                resid = resid.max((sv[(r, 0)] - vals[c] * v[(r, 0)]).abs());
            }
            assert!(resid < 1e-7, "mode {c} residual {resid}");
        }
    }
}
