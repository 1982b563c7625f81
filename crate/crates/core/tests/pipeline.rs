//! End-to-end pipeline checks against independent references: the OU
//! process with its analytic spectrum/density, the double-well system with
//! the Fokker-Planck reference, and the convergence behaviors in M and dt.

use std::collections::BTreeMap;

use dpdd_core::density::{
    coefficients, forecast_density, forecast_density_multi, raw_moments, ForecastOptions,
    GaussianSpec, Grid, InitialDensity, SpectralForecastModel, StationaryDensity,
};
use dpdd_core::dict::{hermite_dict, monomial_dict, normalized_hermite};
use dpdd_core::edmd::{assemble_grams, eval_eigenfunction, fit_koopman};
use dpdd_core::error::Error;
use dpdd_core::oracle::{error_metrics, fpe_solve_1d, ou_analytic, FpeConfig, OuInitial};
use dpdd_core::sde::{
    builtin_model, sample_stationary_pairs, sample_stationary_pairs_strided, SampleMode,
    SimConfig, SnapshotPairs,
};

const GOLD: u64 = 0x9E3779B97F4A7C15;

/// Well-separated seeds: ensemble mode XORs the seed with the trajectory
/// index, so nearby seeds would share RNG streams.
fn sep(i: u64) -> u64 {
    i.wrapping_mul(GOLD) ^ 0x5EED
}

fn ou() -> dpdd_core::sde::SdeModel {
    builtin_model("ou", &BTreeMap::new()).unwrap()
}

fn double_well() -> dpdd_core::sde::SdeModel {
    builtin_model("double-well", &BTreeMap::new()).unwrap()
}

/// Ensemble pairs at a wide sampling interval: fine integration steps,
/// pair separation stride x dt.
fn ou_pairs_wide(m: usize, seed: u64) -> SnapshotPairs {
    let cfg = SimConfig::new(0.01, 0, 800, sep(seed));
    sample_stationary_pairs_strided(&ou(), &cfg, m, SampleMode::Ensemble, 25).unwrap()
}

#[test]
fn ou_spectrum_from_wide_interval_pairs() {
    let pairs = ou_pairs_wide(20_000, 0);
    let dict = monomial_dict(1, 2).unwrap();
    let model = fit_koopman(&pairs, dict, 1e-10).unwrap();
    assert!(model.lambda[0].norm() < 1e-8);
    assert!((model.lambda[1].re + 1.0).abs() < 0.06, "lambda1 = {}", model.lambda[1].re);
    assert!((model.lambda[2].re + 2.0).abs() < 0.15, "lambda2 = {}", model.lambda[2].re);
    for l in &model.lambda {
        assert!(l.im.abs() < 1e-8);
    }
}

#[test]
fn ou_eigenfunctions_match_hermite_references() {
    let pairs = ou_pairs_wide(10_000, 1);
    let dict = monomial_dict(1, 2).unwrap();
    let model = fit_koopman(&pairs, dict, 1e-10).unwrap();
    let m = pairs.len();
    for (mode, degree, tol) in [(1usize, 1u32, 0.08), (2, 2, 0.20)] {
        let phi = eval_eigenfunction(&model, mode, pairs.x.as_ref()).unwrap();
        let reference: Vec<f64> = (0..m)
            .map(|c| normalized_hermite(degree, pairs.x[(0, c)]))
            .collect();
        let dist = |sign: f64| -> f64 {
            (phi.iter()
                .zip(&reference)
                .map(|(p, r)| (p.re * sign - r).powi(2) + p.im.powi(2))
                .sum::<f64>()
                / m as f64)
                .sqrt()
        };
        let d = dist(1.0).min(dist(-1.0));
        assert!(d < tol, "mode {mode}: weighted-L2 distance {d}");
        // sample correlation with the reference exceeds 0.99 for phi_1
        if mode == 1 {
            let num: f64 = phi.iter().zip(&reference).map(|(p, r)| p.re * r).sum();
            let den: f64 = (phi.iter().map(|p| p.norm_sqr()).sum::<f64>()
                * reference.iter().map(|r| r * r).sum::<f64>())
            .sqrt();
            assert!((num / den).abs() > 0.99);
        }
    }
}

#[test]
fn hermite_and_monomial_dictionaries_share_the_spectrum() {
    // identical spans give the same projected operator
    let pairs = ou_pairs_wide(4_000, 2);
    let mono = fit_koopman(&pairs, monomial_dict(1, 2).unwrap(), 1e-10).unwrap();
    let herm = fit_koopman(&pairs, hermite_dict(2).unwrap(), 1e-10).unwrap();
    for (a, b) in mono.lambda.iter().zip(&herm.lambda) {
        assert!((a.re - b.re).abs() < 1e-8, "{} vs {}", a.re, b.re);
    }
}

#[test]
fn ou_density_forecast_against_analytic_oracle() {
    let pairs = ou_pairs_wide(40_000, 104);
    let dict = monomial_dict(1, 4).unwrap();
    let koopman = fit_koopman(&pairs, dict, 1e-10).unwrap();
    let ps = StationaryDensity::standard_gaussian(1);
    let x0 = 0.8;
    let p0 = InitialDensity::Gaussian(GaussianSpec::diagonal(vec![x0], vec![0.5]).unwrap());
    let model = SpectralForecastModel::new(koopman, ps, &p0, pairs.x.clone()).unwrap();
    let grid = Grid::line(-4.0, 4.0, 400).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let (field, _) = forecast_density(&model, t, &grid, ForecastOptions::default()).unwrap();
        let reference = ou_analytic(OuInitial::Gaussian { mean: x0, var: 0.5 }, t, &grid).unwrap();
        let report = error_metrics(&field, &reference).unwrap();
        assert!(report.rel_l2 < 0.10, "t = {t}: rel l2 = {}", report.rel_l2);
        // mass stays near one
        let mass = field.mass(0);
        assert!((0.98..=1.02).contains(&mass), "t = {t}: mass = {mass}");
    }
}

#[test]
fn ou_moment_forecasts_track_the_closed_form() {
    let pairs = ou_pairs_wide(20_000, 101);
    let dict = monomial_dict(1, 4).unwrap();
    let koopman = fit_koopman(&pairs, dict, 1e-10).unwrap();
    let ps = StationaryDensity::standard_gaussian(1);
    let x0 = 1.2;
    let p0 = InitialDensity::Gaussian(GaussianSpec::diagonal(vec![x0], vec![0.5]).unwrap());
    let model = SpectralForecastModel::new(koopman, ps, &p0, pairs.x.clone()).unwrap();
    let times = [0.0, 0.5, 1.0, 2.0, 3.0];
    let series = raw_moments(&model, &[1, 2], &times).unwrap();
    for (ti, &t) in times.iter().enumerate() {
        let mean_got = series.rows[0].values[ti];
        let mean_expect = x0 * (-t).exp();
        assert!(
            (mean_got - mean_expect).abs() < 0.1 * mean_expect.abs().max(0.05),
            "t = {t}: mean {mean_got} vs {mean_expect}"
        );
        let m2_got = series.rows[1].values[ti];
        let decay = (-t).exp();
        let var = 0.5 * decay * decay + 1.0 - decay * decay;
        let m2_expect = var + mean_expect * mean_expect;
        assert!(
            (m2_got - m2_expect).abs() < 0.12 * m2_expect,
            "t = {t}: m2 {m2_got} vs {m2_expect}"
        );
    }
}

fn doublewell_pairs(m: usize, seed: u64) -> SnapshotPairs {
    let cfg = SimConfig::new(0.01, 0, 2_500, sep(seed));
    sample_stationary_pairs_strided(&double_well(), &cfg, m, SampleMode::Ensemble, 25).unwrap()
}

#[test]
fn doublewell_stationary_forecast_matches_fpe_reference() {
    let pairs = doublewell_pairs(10_000, 200);
    let dict = monomial_dict(1, 5).unwrap();
    let koopman = fit_koopman(&pairs, dict, 1e-10).unwrap();
    let ps = StationaryDensity::double_well(2.0f64.sqrt(), (-3.5, 3.5)).unwrap();
    let model =
        SpectralForecastModel::new(koopman, ps, &InitialDensity::Stationary, pairs.x.clone())
            .unwrap();

    // Fokker-Planck reference from the analytic stationary density
    let config = FpeConfig {
        domain: (-2.5, 2.5),
        n_cells: 400,
        dt: 1e-3,
    };
    let mut p0_grid: Vec<f64> = (0..config.n_cells)
        .map(|i| model.ps.eval(&[config.cell_center(i)]))
        .collect();
    let mass: f64 = p0_grid.iter().sum::<f64>() * config.cell_width();
    for v in p0_grid.iter_mut() {
        *v /= mass;
    }
    let times = [0.5, 2.0, 5.0];
    let reference = fpe_solve_1d(&double_well(), &p0_grid, &config, &times).unwrap();
    let (field, _) = forecast_density_multi(
        &model,
        &times,
        &reference.grid,
        ForecastOptions::default(),
    )
    .unwrap();
    let report = error_metrics(&field, &reference).unwrap();
    for e in &report.per_time {
        assert!(e.rel_l2 < 0.05, "t = {}: rel l2 = {}", e.t, e.rel_l2);
    }
}

#[test]
fn doublewell_transient_error_decays() {
    let pairs = doublewell_pairs(10_000, 201);
    let dict = monomial_dict(1, 5).unwrap();
    let koopman = fit_koopman(&pairs, dict, 1e-10).unwrap();
    let ps = StationaryDensity::double_well(2.0f64.sqrt(), (-3.5, 3.5)).unwrap();
    let p0 = InitialDensity::Gaussian(GaussianSpec::diagonal(vec![0.0], vec![1.0]).unwrap());
    let model = SpectralForecastModel::new(koopman, ps, &p0, pairs.x.clone()).unwrap();

    let config = FpeConfig {
        domain: (-2.5, 2.5),
        n_cells: 400,
        dt: 1e-3,
    };
    let mut p0_grid: Vec<f64> = (0..config.n_cells)
        .map(|i| {
            let x = config.cell_center(i);
            (-(x * x) / 2.0).exp()
        })
        .collect();
    let mass: f64 = p0_grid.iter().sum::<f64>() * config.cell_width();
    for v in p0_grid.iter_mut() {
        *v /= mass;
    }
    let times = [0.5, 5.0];
    let reference = fpe_solve_1d(&double_well(), &p0_grid, &config, &times).unwrap();
    let (field, _) = forecast_density_multi(
        &model,
        &times,
        &reference.grid,
        ForecastOptions::default(),
    )
    .unwrap();
    let report = error_metrics(&field, &reference).unwrap();
    assert!(
        report.per_time[1].rel_l2 < report.per_time[0].rel_l2,
        "rel l2 did not decay: {} -> {}",
        report.per_time[0].rel_l2,
        report.per_time[1].rel_l2
    );
}

#[test]
fn reversible_systems_have_nearly_real_spectra() {
    for (pairs, name) in [
        (ou_pairs_wide(10_000, 3), "ou"),
        (doublewell_pairs(10_000, 202), "double-well"),
    ] {
        let dict = monomial_dict(1, 4).unwrap();
        let model = fit_koopman(&pairs, dict, 1e-10).unwrap();
        for l in &model.lambda {
            let ratio = l.im.abs() / (1.0 + l.re.abs());
            assert!(ratio < 0.05, "{name}: lambda = {l}");
        }
    }
}

#[test]
fn monte_carlo_rate_for_gram_entries() {
    // across-seed std of G[1][1] (the <x,x> entry) halves per 4x M
    let dict = monomial_dict(1, 2).unwrap();
    let mut stds = Vec::new();
    for &m in &[1_000usize, 4_000] {
        let mut vals = Vec::new();
        for seed in 0..10u64 {
            let cfg = SimConfig::new(0.01, 0, 600, sep(1_000 + seed));
            let pairs =
                sample_stationary_pairs(&ou(), &cfg, m, SampleMode::Ensemble).unwrap();
            let psi_x = dict.eval_matrix(pairs.x.as_ref()).unwrap();
            let psi_y = dict.eval_matrix(pairs.y.as_ref()).unwrap();
            let grams = assemble_grams(psi_x.as_ref(), psi_y.as_ref()).unwrap();
            vals.push(grams.g[(1, 1)]);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        stds.push(var.sqrt());
    }
    let ratio = stds[0] / stds[1];
    assert!(
        (1.4..=2.8).contains(&ratio),
        "M^(-1/2) rate violated: stds = {stds:?}, ratio = {ratio}"
    );
}

#[test]
fn coarser_snapshot_intervals_increase_bias() {
    // |lambda_1 + 1| grows with the sampling interval. The per-seed noise
    // scales like 1/sqrt(M dt) and swamps the O(dt) bias at the small end,
    // so the bias is estimated by averaging the same-seed runs before
    // comparing.
    let m = 100_000;
    let n_seeds = 12u64;
    let mut biases = Vec::new();
    for &dt in &[0.01, 0.05, 0.1] {
        let mut acc = 0.0;
        for seed in 0..n_seeds {
            let cfg = SimConfig::new(dt, 0, 400, sep(50 + seed));
            let pairs = sample_stationary_pairs(&ou(), &cfg, m, SampleMode::Ensemble).unwrap();
            let model = fit_koopman(&pairs, monomial_dict(1, 2).unwrap(), 1e-10).unwrap();
            acc += model.lambda[1].re;
        }
        biases.push((acc / n_seeds as f64 + 1.0).abs());
    }
    assert!(
        biases[0] <= biases[1] && biases[1] <= biases[2],
        "bias not monotone in dt: {biases:?}"
    );
}

#[test]
fn semigroup_consistency_between_intervals() {
    // eigenvalues fitted at dt and 2 dt agree within 10% for the first
    // three modes (diagnostic-level check)
    let m = 20_000;
    let cfg = SimConfig::new(0.01, 0, 800, sep(23));
    let base = sample_stationary_pairs_strided(&ou(), &cfg, m, SampleMode::Ensemble, 25).unwrap();
    let twice = sample_stationary_pairs_strided(&ou(), &cfg, m, SampleMode::Ensemble, 50).unwrap();
    let dict = monomial_dict(1, 2).unwrap();
    let a = fit_koopman(&base, dict.clone(), 1e-10).unwrap();
    let b = fit_koopman(&twice, dict, 1e-10).unwrap();
    for i in 1..3 {
        let (la, lb) = (a.lambda[i].re, b.lambda[i].re);
        assert!(
            (la - lb).abs() / la.abs() < 0.10,
            "mode {i}: {la} at dt vs {lb} at 2dt"
        );
    }
}

#[test]
fn weak_convergence_in_samples_and_dictionary() {
    // forecast error against the analytic solution decreases when M grows
    // 1e3 -> 1e4 and when the dictionary degree grows 2 -> 3 (majority
    // over 5 seeds)
    let grid = Grid::line(-4.0, 4.0, 200).unwrap();
    let x0 = 0.8;
    let p0 = InitialDensity::Gaussian(GaussianSpec::diagonal(vec![x0], vec![0.5]).unwrap());
    let reference = ou_analytic(OuInitial::Gaussian { mean: x0, var: 0.5 }, 0.5, &grid).unwrap();
    let run = |m: usize, deg: u32, seed: u64| -> f64 {
        let cfg = SimConfig::new(0.01, 0, 800, sep(seed));
        let pairs = sample_stationary_pairs_strided(&ou(), &cfg, m, SampleMode::Ensemble, 25).unwrap();
        let koopman = fit_koopman(&pairs, monomial_dict(1, deg).unwrap(), 1e-10).unwrap();
        let ps = StationaryDensity::standard_gaussian(1);
        let model = SpectralForecastModel::new(koopman, ps, &p0, pairs.x.clone()).unwrap();
        let (field, _) = forecast_density(&model, 0.5, &grid, ForecastOptions::default()).unwrap();
        error_metrics(&field, &reference).unwrap().rel_l2
    };
    let mut m_votes = 0;
    let mut n_votes = 0;
    for seed in 0..5u64 {
        if run(10_000, 2, 600 + seed) <= run(1_000, 2, 600 + seed) {
            m_votes += 1;
        }
        if run(10_000, 3, 700 + seed) <= run(10_000, 2, 700 + seed) {
            n_votes += 1;
        }
    }
    assert!(m_votes >= 3, "M-refinement improved only {m_votes}/5 runs");
    assert!(n_votes >= 3, "N-refinement improved only {n_votes}/5 runs");
}

#[test]
fn adjoint_identity_for_the_ou_generator() {
    // L*(phi_k p_s) = lambda_k (phi_k p_s) for the OU instance, checked with
    // central differences; the residual decays at second order in h
    let ps = |x: f64| (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let residual = |k: u32, h: f64| -> f64 {
        let f = |x: f64| normalized_hermite(k, x) * ps(x);
        // L* v = d/dx (x v) + d^2 v / dx^2
        let mut worst: f64 = 0.0;
        let mut x = -3.0;
        while x <= 3.0 {
            let xv = |x: f64| x * f(x);
            let dxv = (xv(x + h) - xv(x - h)) / (2.0 * h);
            let d2v = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            let lhs = dxv + d2v;
            let rhs = -(k as f64) * f(x);
            worst = worst.max((lhs - rhs).abs());
            x += 0.125;
        }
        worst
    };
    for k in [1u32, 2] {
        let r1 = residual(k, 0.02);
        let r2 = residual(k, 0.01);
        let ratio = r1 / r2;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "k = {k}: residuals {r1}, {r2}, ratio {ratio}"
        );
    }
}

#[test]
fn stationary_coefficients_are_clean() {
    let pairs = ou_pairs_wide(10_000, 4);
    let dict = monomial_dict(1, 3).unwrap();
    let koopman = fit_koopman(&pairs, dict, 1e-10).unwrap();
    let ps = StationaryDensity::standard_gaussian(1);
    let c0 = coefficients(&koopman, &ps, &InitialDensity::Stationary, pairs.x.as_ref()).unwrap();
    assert_eq!(c0[0].re, 1.0);
    assert_eq!(c0[0].im, 0.0);
    let bound = 5.0 / (pairs.len() as f64).sqrt();
    for c in &c0[1..] {
        assert!(c.norm() <= bound, "|c| = {}", c.norm());
    }
}

#[test]
fn divergence_surfaces_with_the_step_index() {
    // double-well with an explosive dt
    let cfg = SimConfig::new(5.0, 0, 10, 3);
    match sample_stationary_pairs(&double_well(), &cfg, 10, SampleMode::SingleTrajectory) {
        Err(Error::SimulationDiverged { step }) => assert!(step > 0),
        other => panic!("expected divergence, got {other:?}"),
    }
}
