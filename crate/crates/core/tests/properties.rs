//! Property tests for the structural invariants.

use faer::{Mat, Side};
use proptest::prelude::*;

use dpdd_core::dict::monomial_dict;
use dpdd_core::edmd::assemble_grams;
use dpdd_core::io::{read_pairs_csv, write_pairs_csv};
use dpdd_core::sde::SnapshotPairs;

fn finite_state() -> impl Strategy<Value = f64> {
    prop_oneof![
        -3.0..3.0f64,
        -1e-3..1e-3f64,
        Just(0.0),
        -30.0..30.0f64,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_matrix_is_psd(values in prop::collection::vec(finite_state(), 24..160)) {
        let m = values.len() / 2;
        let x = Mat::<f64>::from_fn(2, m, |r, c| values[2 * c + r]);
        let dict = monomial_dict(2, 2).unwrap();
        let psi = dict.eval_matrix(x.as_ref()).unwrap();
        let grams = assemble_grams(psi.as_ref(), psi.as_ref()).unwrap();
        // symmetric by construction
        let n = dict.n_obs();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(grams.g[(i, j)], grams.g[(j, i)]);
            }
        }
        let eig = grams.g.self_adjoint_eigen(Side::Lower).unwrap();
        let evals = eig.S();
        let max = (0..n).map(|i| evals[i].abs()).fold(0.0f64, f64::max);
        for i in 0..n {
            prop_assert!(evals[i] >= -1e-10 * max.max(1.0), "eig {} = {}", i, evals[i]);
        }
    }

    #[test]
    fn pairs_csv_round_trips_bit_exactly(
        rows in prop::collection::vec((finite_state(), finite_state()), 1..40),
        dt in 1e-6..1.0f64,
    ) {
        let m = rows.len();
        let x = Mat::<f64>::from_fn(1, m, |_, c| rows[c].0);
        let y = Mat::<f64>::from_fn(1, m, |_, c| rows[c].1);
        let pairs = SnapshotPairs { x, y, dt, source_seed: None };
        let path = std::env::temp_dir().join(format!("dpdd-prop-{m}-{}.csv", std::process::id()));
        write_pairs_csv(&path, &pairs).unwrap();
        let back = read_pairs_csv(&path).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(back.dt.to_bits(), pairs.dt.to_bits());
        for c in 0..m {
            prop_assert_eq!(back.x[(0, c)].to_bits(), pairs.x[(0, c)].to_bits());
            prop_assert_eq!(back.y[(0, c)].to_bits(), pairs.y[(0, c)].to_bits());
        }
    }

    #[test]
    fn eval_matrix_is_columnwise(values in prop::collection::vec(finite_state(), 6..60)) {
        let m = values.len() / 3;
        let x = Mat::<f64>::from_fn(3, m, |r, c| values[3 * c + r]);
        let dict = monomial_dict(3, 2).unwrap();
        let joint = dict.eval_matrix(x.as_ref()).unwrap();
        for c in 0..m {
            let col = Mat::<f64>::from_fn(3, 1, |r, _| x[(r, c)]);
            let single = dict.eval_matrix(col.as_ref()).unwrap();
            for r in 0..dict.n_obs() {
                prop_assert_eq!(joint[(r, c)].to_bits(), single[(r, 0)].to_bits());
            }
        }
    }
}
