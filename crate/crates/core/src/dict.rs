//! Observable dictionaries: ordered families psi = (psi_1, ..., psi_N) of
//! scalar functions on the state space, evaluated column-wise on state
//! matrices. The snapshot matrix entry (i, m) is psi_i(x_m).

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single dictionary entry.
///
/// `Hermite` terms are the probabilists' Hermite polynomials normalized by
/// 1/sqrt(k!), so they are orthonormal under N(0,1). `LinearPower` terms are
/// powers of a fixed linear form, (w^T x)^p, which covers observables such as
/// (u + v)^2 without a general expression parser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TermSpec {
    Monomial { exponents: Vec<u32> },
    Hermite { degree: u32 },
    LinearPower { weights: Vec<f64>, power: u32 },
}

impl TermSpec {
    /// True when the term is identically one.
    pub fn is_constant(&self) -> bool {
        match self {
            TermSpec::Monomial { exponents } => exponents.iter().all(|&e| e == 0),
            TermSpec::Hermite { degree } => *degree == 0,
            TermSpec::LinearPower { power, .. } => *power == 0,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TermSpec::Monomial { exponents } => exponents
                .iter()
                .zip(x)
                .map(|(&e, &v)| v.powi(e as i32))
                .product(),
            TermSpec::Hermite { degree } => normalized_hermite(*degree, x[0]),
            TermSpec::LinearPower { weights, power } => {
                let s: f64 = weights.iter().zip(x).map(|(&w, &v)| w * v).sum();
                s.powi(*power as i32)
            }
        }
    }
}

/// Normalized probabilists' Hermite polynomial H_k(x)/sqrt(k!), evaluated by
/// the stable normalized three-term recursion
/// phi_{k+1} = (x phi_k - sqrt(k) phi_{k-1}) / sqrt(k+1).
pub fn normalized_hermite(degree: u32, x: f64) -> f64 {
    let mut prev = 1.0; // phi_0
    if degree == 0 {
        return prev;
    }
    let mut cur = x; // phi_1
    for k in 1..degree {
        let k = k as f64;
        let next = (x * cur - k.sqrt() * prev) / (k + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// A finite, ordered dictionary of observables over a d-dimensional state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    terms: Vec<TermSpec>,
    dim_state: usize,
    has_constant: bool,
}

impl Dictionary {
    /// Builds a dictionary, checking term arity, uniqueness, and N >= 2.
    pub fn new(terms: Vec<TermSpec>, dim_state: usize) -> Result<Self> {
        if dim_state == 0 {
            return Err(Error::input("state dimension must be positive"));
        }
        if terms.len() < 2 {
            return Err(Error::input(format!(
                "dictionary needs at least 2 terms, got {}",
                terms.len()
            )));
        }
        for (i, t) in terms.iter().enumerate() {
            match t {
                TermSpec::Monomial { exponents } => {
                    if exponents.len() != dim_state {
                        return Err(Error::input(format!(
                            "term {i}: monomial has {} exponents, state dimension is {dim_state}",
                            exponents.len()
                        )));
                    }
                }
                TermSpec::Hermite { .. } => {
                    if dim_state != 1 {
                        return Err(Error::input(
                            "hermite terms are supported only for 1-D state spaces",
                        ));
                    }
                }
                TermSpec::LinearPower { weights, .. } => {
                    if weights.len() != dim_state {
                        return Err(Error::input(format!(
                            "term {i}: linear-power has {} weights, state dimension is {dim_state}",
                            weights.len()
                        )));
                    }
                }
            }
            if terms[..i].contains(t) {
                return Err(Error::input(format!("duplicate dictionary term at index {i}")));
            }
        }
        let has_constant = terms[0].is_constant();
        Ok(Dictionary {
            terms,
            dim_state,
            has_constant,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.terms.len()
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn has_constant(&self) -> bool {
        self.has_constant
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    /// Evaluates all terms at one state, writing into `out` (length N).
    pub fn eval_point(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.terms.len());
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.eval(x);
        }
    }

    /// Evaluates the dictionary on a d x M state matrix, returning the
    /// N x M snapshot matrix with entry (i, m) = psi_i(x_m).
    pub fn eval_matrix(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if x.nrows() != self.dim_state {
            return Err(Error::input(format!(
                "state matrix has {} rows, dictionary expects {}",
                x.nrows(),
                self.dim_state
            )));
        }
        let n = self.n_obs();
        let m = x.ncols();
        let mut out = Mat::<f64>::zeros(n, m);
        let mut point = vec![0.0; self.dim_state];
        let mut vals = vec![0.0; n];
        for col in 0..m {
            for (r, p) in point.iter_mut().enumerate() {
                *p = x[(r, col)];
            }
            self.eval_point(&point, &mut vals);
            for (r, &v) in vals.iter().enumerate() {
                out[(r, col)] = v;
            }
        }
        Ok(out)
    }
}

/// All monomials of total degree <= `max_degree`, constant first, then
/// graded-lexicographic within each grade (for d = 2, degree 2 this is
/// 1, u, v, u^2, uv, v^2).
pub fn monomial_dict(d: usize, max_degree: u32) -> Result<Dictionary> {
    if max_degree < 1 {
        return Err(Error::input("monomial dictionary needs max_degree >= 1"));
    }
    let mut terms = Vec::new();
    for grade in 0..=max_degree {
        let mut exps = vec![0u32; d];
        push_grade(&mut terms, &mut exps, 0, grade);
    }
    Dictionary::new(terms, d)
}

fn push_grade(terms: &mut Vec<TermSpec>, exps: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == exps.len() {
        exps[pos] = remaining;
        terms.push(TermSpec::Monomial {
            exponents: exps.to_vec(),
        });
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e;
        push_grade(terms, exps, pos + 1, remaining - e);
    }
    exps[pos] = 0;
}

/// Normalized Hermite dictionary H_k/sqrt(k!) for k = 0..=max_degree (1-D).
pub fn hermite_dict(max_degree: u32) -> Result<Dictionary> {
    if max_degree < 1 {
        return Err(Error::input("hermite dictionary needs max_degree >= 1"));
    }
    let terms = (0..=max_degree)
        .map(|degree| TermSpec::Hermite { degree })
        .collect();
    Dictionary::new(terms, 1)
}

/// Dictionary of linear-power observables with the constant prepended:
/// {1, (w_1^T x)^{p_1}, ...}.
pub fn linear_power_dict(d: usize, specs: &[(Vec<f64>, u32)]) -> Result<Dictionary> {
    let mut terms = vec![TermSpec::Monomial {
        exponents: vec![0; d],
    }];
    for (weights, power) in specs {
        terms.push(TermSpec::LinearPower {
            weights: weights.clone(),
            power: *power,
        });
    }
    Dictionary::new(terms, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn monomial_counts_and_order() {
        let d1 = monomial_dict(1, 2).unwrap();
        assert_eq!(d1.n_obs(), 3);
        assert!(d1.has_constant());

        let d5 = monomial_dict(1, 5).unwrap();
        assert_eq!(d5.n_obs(), 6);

        let d2 = monomial_dict(2, 2).unwrap();
        assert_eq!(d2.n_obs(), 6);
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        for (t, e) in d2.terms().iter().zip(&expected) {
            match t {
                TermSpec::Monomial { exponents } => assert_eq!(exponents, e),
                _ => panic!("expected monomial"),
            }
        }
    }

    #[test]
    fn hermite_values() {
        // phi_0 = 1, phi_1 = x, phi_2 = (x^2 - 1)/sqrt(2)
        assert_eq!(normalized_hermite(0, 0.7), 1.0);
        assert_eq!(normalized_hermite(1, 0.7), 0.7);
        let x = 1.3;
        let expect = (x * x - 1.0) / 2.0f64.sqrt();
        assert!((normalized_hermite(2, x) - expect).abs() < 1e-14);
        // root of x^2 - 1
        assert!(normalized_hermite(2, 1.0).abs() < 1e-15);
        // phi_3(x) = (x^3 - 3x)/sqrt(6); at x = 2 this is 2/sqrt(6)
        assert!((normalized_hermite(3, 2.0) - 2.0 / 6.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermite_dict_requires_1d() {
        let d = hermite_dict(2).unwrap();
        assert_eq!(d.dim_state(), 1);
        let err = Dictionary::new(vec![TermSpec::Hermite { degree: 0 }, TermSpec::Hermite { degree: 1 }], 2);
        assert!(err.is_err());
    }

    #[test]
    fn eval_matrix_columns() {
        let d = monomial_dict(1, 2).unwrap();
        let x = Mat::<f64>::from_fn(1, 1, |_, _| 2.0);
        let m = d.eval_matrix(x.as_ref()).unwrap();
        assert_eq!((m[(0, 0)], m[(1, 0)], m[(2, 0)]), (1.0, 2.0, 4.0));
    }

    #[test]
    fn linear_power_term() {
        let d = linear_power_dict(2, &[(vec![1.0, 0.0], 1), (vec![0.0, 1.0], 1), (vec![1.0, 1.0], 2)]).unwrap();
        assert_eq!(d.n_obs(), 4);
        let x = Mat::<f64>::from_fn(2, 1, |r, _| if r == 0 { 1.0 } else { 2.0 });
        let m = d.eval_matrix(x.as_ref()).unwrap();
        assert_eq!(m[(3, 0)], 9.0); // (u + v)^2 at (1, 2)
    }

    #[test]
    fn constant_row_is_ones() {
        let d = monomial_dict(2, 3).unwrap();
        let x = Mat::<f64>::from_fn(2, 7, |r, c| (r as f64 + 1.0) * (c as f64 - 3.0) * 0.31);
        let m = d.eval_matrix(x.as_ref()).unwrap();
        for c in 0..7 {
            assert_eq!(m[(0, c)], 1.0);
        }
    }

    #[test]
    fn columnwise_independence() {
        let d = monomial_dict(2, 2).unwrap();
        let x = Mat::<f64>::from_fn(2, 5, |r, c| (r * 5 + c) as f64 * 0.17 - 0.4);
        let joint = d.eval_matrix(x.as_ref()).unwrap();
        for c in 0..5 {
            let col = Mat::<f64>::from_fn(2, 1, |r, _| x[(r, c)]);
            let single = d.eval_matrix(col.as_ref()).unwrap();
            for r in 0..d.n_obs() {
                assert_eq!(joint[(r, c)], single[(r, 0)]);
            }
        }
    }

    #[test]
    fn duplicate_terms_rejected() {
        let terms = vec![
            TermSpec::Monomial { exponents: vec![0] },
            TermSpec::Monomial { exponents: vec![1] },
            TermSpec::Monomial { exponents: vec![1] },
        ];
        assert!(Dictionary::new(terms, 1).is_err());
    }

    #[test]
    fn hermite_empirical_orthonormality() {
        // (1/M) sum phi_j(x) phi_k(x) -> delta_jk for x ~ N(0,1);
        // off-diagonals below 3/sqrt(M) at M = 1e5.
        let m = 100_000usize;
        let dict = hermite_dict(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = Mat::<f64>::from_fn(1, m, |_, c| xs[c]);
        let psi = dict.eval_matrix(x.as_ref()).unwrap();
        for j in 0..dict.n_obs() {
            for k in 0..dict.n_obs() {
                let inner: f64 = (0..m).map(|c| psi[(j, c)] * psi[(k, c)]).sum::<f64>() / m as f64;
                if j == k {
                    // diagonal entries have O(1)-variance integrands; loose check
                    assert!((inner - 1.0).abs() < 0.1, "<phi_{j}, phi_{j}> = {inner}");
                } else {
                    // 3 sigma error bar; the product's variance grows with the
                    // mode numbers, so scale the M^(-1/2) bound by its
                    // sample std (= 1 for the low modes)
                    let var: f64 = (0..m)
                        .map(|c| (psi[(j, c)] * psi[(k, c)] - inner).powi(2))
                        .sum::<f64>()
                        / m as f64;
                    let tol = 3.0 * var.sqrt().max(1.0) / (m as f64).sqrt();
                    assert!(inner.abs() < tol, "<phi_{j}, phi_{k}> = {inner} (tol {tol})");
                }
            }
        }
    }
}
