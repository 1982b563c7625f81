//! dpdd: spectral probability density forecasting for ergodic SDEs.
//!
//! Subcommands cover the full pipeline: `simulate` stationary snapshot
//! pairs, `fit` the weighted-space EDMD spectral model, `forecast` densities
//! and moments, `df` the diffusion-maps baseline, `fpe` and `ensemble`
//! reference solutions, and `compare` density files.
//!
//! Exit codes: 0 success, 2 usage/input errors, 3 simulation divergence,
//! 4 numerical degeneracy.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use dpdd_core::density::{
    forecast_density_multi, kde_fit, DensityField, ForecastOptions, InitialDensity, Producer,
    SpectralForecastModel, StationaryDensity,
};
use dpdd_core::dfmap::{
    df_coefficients, df_expectation, df_forecast, df_shift_matrix, diffusion_map,
    DfCoefficientWeight, DfModel, EpsilonRule, GeneratorScale, LookupMode,
};
use dpdd_core::edmd::fit_koopman;
use dpdd_core::error::Error;
use dpdd_core::io;
use dpdd_core::oracle::{doublewell_ps, ensemble_forecast, error_metrics, fpe_solve_1d, FpeConfig};
use dpdd_core::sde::{
    builtin_model, default_burn_in, sample_stationary_pairs_strided, SampleMode, Scheme, SimConfig,
};

mod specs;
use specs::{
    parse_dict, parse_f64_list, parse_grid, parse_p0, parse_params, parse_stationary,
    parse_u32_list, StationarySpec,
};

#[derive(Parser)]
#[command(name = "dpdd", version, about = "Probability density forecasting for ergodic SDEs")]
struct Cli {
    /// Rayon thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for the randomized stages (simulation, ensembles).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate stationary snapshot pairs and write them as CSV.
    Simulate {
        /// Model name: double-well, ou, turbulence2d, lorenz63.
        #[arg(long)]
        model: String,
        /// Parameter overrides, e.g. sigma=1.0,rho=26.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        params: String,
        /// Number of snapshot pairs.
        #[arg(long)]
        m: usize,
        /// Integration step.
        #[arg(long)]
        dt: f64,
        /// Pair interval in integration steps (pair dt = stride x dt).
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Burn-in steps; default max(10000, 20% of the sampled span).
        #[arg(long)]
        burn_in: Option<usize>,
        /// single or ensemble.
        #[arg(long, default_value = "single")]
        mode: String,
        /// euler-maruyama or milstein.
        #[arg(long, default_value = "euler-maruyama")]
        scheme: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the spectral forecast model from a pairs CSV.
    Fit {
        #[arg(long)]
        pairs: PathBuf,
        /// monomial:<deg>, hermite:<deg>, or linpow:w,..:p[;...].
        #[arg(long)]
        dict: String,
        /// analytic:gaussian, analytic:doublewell[:sigma], kde:silverman, kde:knn.
        #[arg(long, default_value = "kde:silverman")]
        stationary: String,
        /// Pseudoinverse truncation relative to sigma_max.
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        #[arg(long)]
        out: PathBuf,
        /// Write basis-construction seconds to this file.
        #[arg(long)]
        timing_out: Option<PathBuf>,
    },
    /// Forecast densities (and optionally moments) from a fitted model.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        /// stationary or gaussian:<means>:<vars>.
        #[arg(long, default_value = "stationary", allow_hyphen_values = true)]
        p0: String,
        /// Comma-separated times.
        #[arg(long)]
        times: String,
        /// a:b:n[,a2:b2:n2[,a3:b3:n3]].
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Moment orders, e.g. 1,2,3,4.
        #[arg(long)]
        moments: Option<String>,
        #[arg(long)]
        moments_out: Option<PathBuf>,
        /// Exclude modes with Re(lambda) > 1e-6.
        #[arg(long)]
        drop_unstable: bool,
        /// Clamp negative densities to zero and renormalize.
        #[arg(long)]
        clip_negative: bool,
    },
    /// Diffusion-forecast baseline on a pairs CSV.
    Df {
        #[arg(long)]
        pairs: PathBuf,
        /// Number of diffusion-map basis functions (capped at M/10).
        #[arg(long, default_value_t = 1000)]
        k: usize,
        /// Kernel bandwidth; "auto" for the median rule.
        #[arg(long, default_value = "auto")]
        epsilon: String,
        /// standard (eps^2/2) or literal (eps) generator scaling.
        #[arg(long, default_value = "standard")]
        scale: String,
        #[arg(long, default_value = "stationary", allow_hyphen_values = true)]
        p0: String,
        #[arg(long, default_value = "kde:silverman")]
        stationary: String,
        /// Include the 1/p_s importance weight in c(0) (importance) or not (literal).
        #[arg(long, default_value = "importance")]
        c0_weight: String,
        /// Forecast times (must be multiples of the pair interval).
        #[arg(long)]
        times: String,
        /// Density-at-samples CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        moments: Option<String>,
        #[arg(long)]
        moments_out: Option<PathBuf>,
        #[arg(long)]
        save_model: Option<PathBuf>,
        #[arg(long)]
        timing_out: Option<PathBuf>,
    },
    /// 1-D Fokker-Planck reference solution.
    Fpe {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        params: String,
        /// stationary or gaussian:<mean>:<var>.
        #[arg(long, allow_hyphen_values = true)]
        p0: String,
        /// Cell-center grid a:b:n (n = number of cells).
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        times: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo ensemble forecast.
    Ensemble {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        params: String,
        #[arg(long, allow_hyphen_values = true)]
        p0: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Optional KDE grid for the terminal cloud (1-D/2-D).
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Cloud CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        density_out: Option<PathBuf>,
    },
    /// Compare two density-field CSVs.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Timing files written by fit/df --timing-out; prints the ratio.
        #[arg(long)]
        timing_a: Option<PathBuf>,
        #[arg(long)]
        timing_b: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(num_threads_default);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .ok();
    faer::set_global_parallelism(faer::Par::rayon(threads));
    match run(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn num_threads_default() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::SimulationDiverged { .. } => 3,
        Error::Degenerate(_)
        | Error::Numerical(_)
        | Error::Bandwidth(_)
        | Error::DegenerateWeight { .. } => 4,
    }
}

fn run(cmd: Command, seed: u64) -> dpdd_core::Result<()> {
    match cmd {
        Command::Simulate {
            model,
            params,
            m,
            dt,
            stride,
            burn_in,
            mode,
            scheme,
            out,
        } => cmd_simulate(&model, &params, m, dt, stride, burn_in, &mode, &scheme, seed, &out),
        Command::Fit {
            pairs,
            dict,
            stationary,
            rtol,
            out,
            timing_out,
        } => cmd_fit(&pairs, &dict, &stationary, rtol, &out, timing_out.as_deref()),
        Command::Forecast {
            model,
            p0,
            times,
            grid,
            out,
            moments,
            moments_out,
            drop_unstable,
            clip_negative,
        } => cmd_forecast(
            &model,
            &p0,
            &times,
            grid.as_deref(),
            out.as_deref(),
            moments.as_deref(),
            moments_out.as_deref(),
            drop_unstable,
            clip_negative,
        ),
        Command::Df {
            pairs,
            k,
            epsilon,
            scale,
            p0,
            stationary,
            c0_weight,
            times,
            out,
            moments,
            moments_out,
            save_model,
            timing_out,
        } => cmd_df(
            &pairs,
            k,
            &epsilon,
            &scale,
            &p0,
            &stationary,
            &c0_weight,
            &times,
            out.as_deref(),
            moments.as_deref(),
            moments_out.as_deref(),
            save_model.as_deref(),
            timing_out.as_deref(),
        ),
        Command::Fpe {
            model,
            params,
            p0,
            grid,
            dt,
            times,
            out,
        } => cmd_fpe(&model, &params, &p0, &grid, dt, &times, &out),
        Command::Ensemble {
            model,
            params,
            p0,
            n,
            t,
            dt,
            grid,
            out,
            density_out,
        } => cmd_ensemble(
            &model,
            &params,
            &p0,
            n,
            t,
            dt,
            seed,
            grid.as_deref(),
            &out,
            density_out.as_deref(),
        ),
        Command::Compare {
            a,
            b,
            out,
            timing_a,
            timing_b,
        } => cmd_compare(&a, &b, out.as_deref(), timing_a.as_deref(), timing_b.as_deref()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model_name: &str,
    params: &str,
    m: usize,
    dt: f64,
    stride: usize,
    burn_in: Option<usize>,
    mode: &str,
    scheme: &str,
    seed: u64,
    out: &std::path::Path,
) -> dpdd_core::Result<()> {
    let model = builtin_model(model_name, &parse_params(params)?)?;
    let mode = match mode {
        "single" | "single-trajectory" => SampleMode::SingleTrajectory,
        "ensemble" => SampleMode::Ensemble,
        other => return Err(Error::input(format!("unknown mode '{other}'; use single or ensemble"))),
    };
    let scheme = match scheme {
        "euler-maruyama" | "em" => Scheme::EulerMaruyama,
        "milstein" => Scheme::Milstein,
        other => {
            return Err(Error::input(format!(
                "unknown scheme '{other}'; use euler-maruyama or milstein"
            )))
        }
    };
    let burn = burn_in.unwrap_or_else(|| default_burn_in(m * stride));
    let config = SimConfig {
        dt,
        n_steps: 0,
        burn_in_steps: burn,
        seed,
        scheme,
    };
    let pairs = sample_stationary_pairs_strided(&model, &config, m, mode, stride)?;
    io::write_pairs_csv(out, &pairs)?;
    println!(
        "wrote {} pairs (dim {}, pair interval {}, burn-in {} steps) to {}",
        pairs.len(),
        pairs.dim(),
        pairs.dt,
        burn,
        out.display()
    );
    for r in 0..pairs.dim() {
        let mean: f64 = (0..pairs.len()).map(|c| pairs.x[(r, c)]).sum::<f64>() / pairs.len() as f64;
        let var: f64 = (0..pairs.len())
            .map(|c| (pairs.x[(r, c)] - mean).powi(2))
            .sum::<f64>()
            / pairs.len() as f64;
        println!("x{}: mean {:+.4e}, variance {:.4e}", r + 1, mean, var);
    }
    Ok(())
}

fn build_stationary(
    spec: &str,
    pairs_x: faer::MatRef<'_, f64>,
) -> dpdd_core::Result<StationaryDensity> {
    match parse_stationary(spec, pairs_x.nrows())? {
        StationarySpec::Analytic(ps) => {
            if ps.dim() != pairs_x.nrows() {
                return Err(Error::input("stationary density dimension mismatch"));
            }
            Ok(ps)
        }
        StationarySpec::Kde(rule) => kde_fit(pairs_x, rule),
    }
}

fn cmd_fit(
    pairs_path: &std::path::Path,
    dict_spec: &str,
    stationary_spec: &str,
    rtol: f64,
    out: &std::path::Path,
    timing_out: Option<&std::path::Path>,
) -> dpdd_core::Result<()> {
    let pairs = io::read_pairs_csv(pairs_path)?;
    let dict = parse_dict(dict_spec, pairs.dim())?;
    if pairs.len() < dict.n_obs() {
        eprintln!(
            "warning: {} samples for {} observables; the Gram matrix is rank-deficient",
            pairs.len(),
            dict.n_obs()
        );
    }
    let t0 = Instant::now();
    let koopman = fit_koopman(&pairs, dict, rtol)?;
    let basis_seconds = t0.elapsed().as_secs_f64();
    if koopman.rank < koopman.n_modes() {
        eprintln!(
            "warning: Gram matrix has effective rank {} of {}",
            koopman.rank,
            koopman.n_modes()
        );
    }
    let unstable = koopman.unstable_modes();
    if !unstable.is_empty() {
        eprintln!(
            "warning: {} mode(s) with Re(lambda) > 1e-6 (indices {:?}); forecasts may use --drop-unstable",
            unstable.len(),
            unstable
        );
    }
    let ps = build_stationary(stationary_spec, pairs.x.as_ref())?;
    let model = SpectralForecastModel::new(koopman, ps, &InitialDensity::Stationary, pairs.x.clone())?;
    println!("eigenvalues (Re(lambda), Im(lambda)), sorted by Re descending:");
    for (i, l) in model.koopman.lambda.iter().enumerate() {
        println!("{i}\t{:+.6e}\t{:+.6e}", l.re, l.im);
    }
    io::save_spectral_model(
        out,
        &model,
        io::Provenance {
            seed: pairs.source_seed,
            m: pairs.len(),
            tool_version: io::tool_version(),
        },
    )?;
    eprintln!("basis construction: {basis_seconds:.6} s");
    if let Some(tpath) = timing_out {
        std::fs::write(tpath, format!("{basis_seconds:.9}\n"))?;
    }
    println!("model written to {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_forecast(
    model_path: &std::path::Path,
    p0_spec: &str,
    times_spec: &str,
    grid_spec: Option<&str>,
    out: Option<&std::path::Path>,
    moments_spec: Option<&str>,
    moments_out: Option<&std::path::Path>,
    drop_unstable: bool,
    clip_negative: bool,
) -> dpdd_core::Result<()> {
    let (loaded, _) = io::load_spectral_model(model_path)?;
    let p0 = parse_p0(p0_spec, loaded.dim())?;
    let c0 = dpdd_core::density::coefficients(
        &loaded.koopman,
        &loaded.ps,
        &p0,
        loaded.train_x.as_ref(),
    )?;
    let model = SpectralForecastModel::from_parts(loaded.koopman, loaded.ps, c0, loaded.train_x)?;
    let times = parse_f64_list(times_spec)?;
    if let Some(gspec) = grid_spec {
        let out = out.ok_or_else(|| Error::input("--out is required with --grid"))?;
        let grid = parse_grid(gspec)?;
        let opts = ForecastOptions {
            drop_unstable,
            clip_negative,
        };
        let (field, report) = forecast_density_multi(&model, &times, &grid, opts)?;
        for (ti, t) in field.times.iter().enumerate() {
            println!(
                "t={t}: mass {:.6}, max imag residual {:.3e}, renormalization {:.6}",
                field.mass(ti),
                report.max_imag_residual[ti],
                report.renormalization[ti]
            );
        }
        io::write_density_csv(out, &field)?;
        println!("density written to {}", out.display());
    }
    if let Some(mspec) = moments_spec {
        let orders = parse_u32_list(mspec)?;
        let max_degree = 2 * max_dict_degree(&model.koopman.dict);
        if orders.iter().any(|&k| k > max_degree) {
            eprintln!(
                "warning: requested moment order exceeds twice the dictionary degree ({max_degree}); values are extrapolations"
            );
        }
        let series = dpdd_core::density::raw_moments(&model, &orders, &times)?;
        let mpath = moments_out.ok_or_else(|| Error::input("--moments-out is required with --moments"))?;
        io::write_moments_csv(mpath, &series)?;
        println!("moments written to {}", mpath.display());
    }
    Ok(())
}

fn max_dict_degree(dict: &dpdd_core::dict::Dictionary) -> u32 {
    dict.terms()
        .iter()
        .map(|t| match t {
            dpdd_core::dict::TermSpec::Monomial { exponents } => exponents.iter().sum(),
            dpdd_core::dict::TermSpec::Hermite { degree } => *degree,
            dpdd_core::dict::TermSpec::LinearPower { power, .. } => *power,
        })
        .max()
        .unwrap_or(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_df(
    pairs_path: &std::path::Path,
    k: usize,
    epsilon_spec: &str,
    scale_spec: &str,
    p0_spec: &str,
    stationary_spec: &str,
    c0_weight_spec: &str,
    times_spec: &str,
    out: Option<&std::path::Path>,
    moments_spec: Option<&str>,
    moments_out: Option<&std::path::Path>,
    save_model: Option<&std::path::Path>,
    timing_out: Option<&std::path::Path>,
) -> dpdd_core::Result<()> {
    let pairs = io::read_pairs_csv(pairs_path)?;
    let m = pairs.len();
    let k_eff = if k > m / 10 {
        let reduced = (m / 10).max(1);
        eprintln!("warning: k = {k} reduced to {reduced} (M/10) for M = {m}");
        reduced
    } else {
        k
    };
    let epsilon = if epsilon_spec == "auto" {
        EpsilonRule::Auto
    } else {
        EpsilonRule::Fixed(
            epsilon_spec
                .parse()
                .map_err(|_| Error::input(format!("bad epsilon '{epsilon_spec}'")))?,
        )
    };
    let scale = match scale_spec {
        "standard" => GeneratorScale::Standard,
        "literal" => GeneratorScale::Literal,
        other => {
            return Err(Error::input(format!(
                "unknown scale '{other}'; use standard or literal"
            )))
        }
    };
    let weight = match c0_weight_spec {
        "importance" => DfCoefficientWeight::ImportanceWeighted,
        "literal" => DfCoefficientWeight::Unweighted,
        other => {
            return Err(Error::input(format!(
                "unknown c0 weight '{other}'; use importance or literal"
            )))
        }
    };

    let t0 = Instant::now();
    let dm = diffusion_map(pairs.x.as_ref(), epsilon, k_eff, scale)?;
    let basis_seconds = t0.elapsed().as_secs_f64();
    eprintln!(
        "basis construction: {basis_seconds:.6} s (k = {k_eff}, epsilon = {:.6e})",
        dm.epsilon
    );
    if let Some(tpath) = timing_out {
        std::fs::write(tpath, format!("{basis_seconds:.9}\n"))?;
    }

    let b = df_shift_matrix(&dm, &pairs, LookupMode::Exact)?;
    let ps = build_stationary(stationary_spec, pairs.x.as_ref())?;
    let p0 = parse_p0(p0_spec, pairs.dim())?;
    let c0 = df_coefficients(&dm, &ps, &p0, weight)?;
    let model = DfModel::new(dm, b, c0, pairs.dt)?;

    println!("generator eigenvalues (first {}):", model.dm.k().min(10));
    for (i, l) in model.dm.eigvals.iter().take(10).enumerate() {
        println!("{i}\t{:+.6e}", l);
    }

    let times = parse_f64_list(times_spec)?;
    if let Some(out) = out {
        // density at sample locations, one block per time
        let mut text = String::new();
        use std::fmt::Write as _;
        let d = model.dm.samples.nrows();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=d).map(|j| format!("x{j}")))
            .chain(std::iter::once("p".to_string()))
            .collect();
        writeln!(text, "{}", header.join(",")).unwrap();
        for &t in &times {
            let steps = model.steps_for(t)?;
            let fc = df_forecast(&model, &ps, steps)?;
            for c in 0..model.dm.n_samples() {
                let row: Vec<String> = std::iter::once(io::format_f64(t))
                    .chain((0..d).map(|r| io::format_f64(model.dm.samples[(r, c)])))
                    .chain(std::iter::once(io::format_f64(fc.density_at_samples[c])))
                    .collect();
                writeln!(text, "{}", row.join(",")).unwrap();
            }
        }
        std::fs::write(out, text)?;
        println!("df density written to {}", out.display());
    }
    if let Some(mspec) = moments_spec {
        let orders = parse_u32_list(mspec)?;
        let mpath = moments_out.ok_or_else(|| Error::input("--moments-out is required with --moments"))?;
        let d = model.dm.samples.nrows();
        let mut rows = Vec::new();
        for j in 0..d {
            for &ord in &orders {
                let g = move |x: &[f64]| x[j].powi(ord as i32);
                let values: dpdd_core::Result<Vec<f64>> = times
                    .iter()
                    .map(|&t| Ok(df_expectation(&model, &g, model.steps_for(t)?)))
                    .collect();
                rows.push(dpdd_core::density::MomentRow {
                    dim: j + 1,
                    order: ord,
                    values: values?,
                });
            }
        }
        let series = dpdd_core::density::MomentSeries {
            times: times.clone(),
            rows,
        };
        io::write_moments_csv(mpath, &series)?;
        println!("df moments written to {}", mpath.display());
    }
    if let Some(mpath) = save_model {
        io::save_df_model(
            mpath,
            &model,
            io::Provenance {
                seed: pairs.source_seed,
                m,
                tool_version: io::tool_version(),
            },
        )?;
        println!("df model written to {}", mpath.display());
    }
    Ok(())
}

fn cmd_fpe(
    model_name: &str,
    params: &str,
    p0_spec: &str,
    grid_spec: &str,
    dt: f64,
    times_spec: &str,
    out: &std::path::Path,
) -> dpdd_core::Result<()> {
    let model = builtin_model(model_name, &parse_params(params)?)?;
    if model.dim_state != 1 {
        return Err(Error::input("the fpe command supports 1-D models only"));
    }
    let grid = parse_grid(grid_spec)?;
    if grid.dim() != 1 {
        return Err(Error::input("the fpe grid must be 1-D (a:b:n)"));
    }
    let gd = grid.dims()[0];
    let config = FpeConfig {
        domain: (gd.lower, gd.upper),
        n_cells: gd.n,
        dt,
    };
    // initial density at cell centers, normalized to unit cell-sum mass
    let mut p0_grid: Vec<f64> = match p0_spec {
        "stationary" => match model_name {
            "double-well" | "doublewell" => {
                let centers = config.center_grid();
                let (field, warn) = doublewell_ps(&centers, model.params["sigma"])?;
                if let Some(w) = warn {
                    eprintln!("warning: {w}");
                }
                field.values[0].clone()
            }
            "ou" => {
                let beta = model.params["beta"];
                let lambda = model.params["lambda"];
                if !(lambda > 0.0) {
                    return Err(Error::input("the OU stationary density needs lambda > 0"));
                }
                let ps = StationaryDensity::gaussian(vec![0.0], vec![beta * beta / (2.0 * lambda)])?;
                (0..config.n_cells)
                    .map(|i| ps.eval(&[config.cell_center(i)]))
                    .collect()
            }
            other => {
                return Err(Error::input(format!(
                    "no analytic stationary density for model '{other}'"
                )))
            }
        },
        spec => {
            let p0 = parse_p0(spec, 1)?;
            let ps = StationaryDensity::standard_gaussian(1); // placeholder, unused by gaussian p0
            (0..config.n_cells)
                .map(|i| p0.eval(&[config.cell_center(i)], &ps))
                .collect()
        }
    };
    let h = config.cell_width();
    let mass: f64 = p0_grid.iter().sum::<f64>() * h;
    if !(mass > 0.0) {
        return Err(Error::input("initial density vanishes on the grid"));
    }
    for v in p0_grid.iter_mut() {
        *v /= mass;
    }
    let times = parse_f64_list(times_spec)?;
    let field = fpe_solve_1d(&model, &p0_grid, &config, &times)?;
    io::write_density_csv(out, &field)?;
    for (ti, t) in field.times.iter().enumerate() {
        let m: f64 = field.values[ti].iter().sum::<f64>() * h;
        println!("t={t}: cell mass {m:.9}");
    }
    println!("fpe density written to {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ensemble(
    model_name: &str,
    params: &str,
    p0_spec: &str,
    n: usize,
    t: f64,
    dt: f64,
    seed: u64,
    grid_spec: Option<&str>,
    out: &std::path::Path,
    density_out: Option<&std::path::Path>,
) -> dpdd_core::Result<()> {
    let model = builtin_model(model_name, &parse_params(params)?)?;
    let p0 = parse_p0(p0_spec, model.dim_state)?;
    let grid = grid_spec.map(parse_grid).transpose()?;
    let fc = ensemble_forecast(&model, &p0, n, t, grid.as_ref(), seed, dt)?;
    io::write_cloud_csv(out, t, &fc.cloud)?;
    println!("cloud of {} particles at t={t} written to {}", n, out.display());
    if let Some(field) = &fc.field {
        let dpath = density_out.ok_or_else(|| Error::input("--density-out is required with --grid"))?;
        io::write_density_csv(dpath, field)?;
        println!("ensemble density written to {}", dpath.display());
    }
    Ok(())
}

fn cmd_compare(
    a_path: &std::path::Path,
    b_path: &std::path::Path,
    out: Option<&std::path::Path>,
    timing_a: Option<&std::path::Path>,
    timing_b: Option<&std::path::Path>,
) -> dpdd_core::Result<()> {
    let a = io::read_density_csv(a_path)?;
    let b = io::read_density_csv(b_path)?;
    let report = error_metrics(&a, &b)?;
    println!(
        "candidate {} ({}) vs reference {} ({})",
        a_path.display(),
        producer_str(&a),
        b_path.display(),
        producer_str(&b)
    );
    for e in &report.per_time {
        println!(
            "t={}: rel_l2 {:.6e}, l1 {:.6e}, linf {:.6e}",
            e.t, e.rel_l2, e.l1, e.linf
        );
    }
    println!(
        "aggregate: rel_l2 {:.6e}, l1 {:.6e}, linf {:.6e}",
        report.rel_l2, report.l1, report.linf
    );
    if let Some(opath) = out {
        io::write_error_csv(opath, &report)?;
        println!("error report written to {}", opath.display());
    }
    if let (Some(ta), Some(tb)) = (timing_a, timing_b) {
        let read_time = |p: &std::path::Path| -> dpdd_core::Result<f64> {
            let text = std::fs::read_to_string(p)?;
            text.trim()
                .parse()
                .map_err(|_| Error::input(format!("bad timing file {}", p.display())))
        };
        let (sa, sb) = (read_time(ta)?, read_time(tb)?);
        println!(
            "timing: a = {sa:.6} s, b = {sb:.6} s, ratio b/a = {:.2}",
            sb / sa
        );
    }
    Ok(())
}

fn producer_str(f: &DensityField) -> &'static str {
    match f.producer {
        Producer::Dpdd => "dpdd",
        Producer::Df => "df",
        Producer::Fpe => "fpe",
        Producer::Ensemble => "ensemble",
        Producer::Analytic => "analytic",
    }
}
