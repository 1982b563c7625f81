//! File formats: snapshot-pair CSV, density-field CSV, moment CSV, particle
//! clouds, and the JSON model files. All numeric output uses 17 significant
//! digits so loads reproduce saved values bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{
    BandwidthRule, DensityField, Grid, GridDim, KdeDensity, MomentSeries, Producer,
    SpectralForecastModel, StationaryDensity,
};
use crate::dfmap::{DfModel, DiffusionMapModel};
use crate::dict::{Dictionary, TermSpec};
use crate::edmd::{Diagnostics, KoopmanModel};
use crate::error::{Error, Result};
use crate::sde::SnapshotPairs;

/// 17 significant digits, enough to round-trip any finite f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_field(path: &str, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        msg: format!("expected a number, got '{s}'"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_string(),
            line,
            msg: format!("non-finite value '{s}'"),
        });
    }
    Ok(v)
}

/// Writes snapshot pairs: `# dt=` sidecar, optional `# seed=`, header
/// `x1,...,xd,y1,...,yd`, one pair per row.
pub fn write_pairs_csv(path: impl AsRef<Path>, pairs: &SnapshotPairs) -> Result<()> {
    pairs.validate()?;
    let d = pairs.dim();
    let m = pairs.len();
    let mut out = String::new();
    writeln!(out, "# dt={}", format_f64(pairs.dt)).unwrap();
    if let Some(seed) = pairs.source_seed {
        writeln!(out, "# seed={seed}").unwrap();
    }
    let header: Vec<String> = (1..=d)
        .map(|j| format!("x{j}"))
        .chain((1..=d).map(|j| format!("y{j}")))
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for c in 0..m {
        let row: Vec<String> = (0..d)
            .map(|r| format_f64(pairs.x[(r, c)]))
            .chain((0..d).map(|r| format_f64(pairs.y[(r, c)])))
            .collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_pairs_csv(path: impl AsRef<Path>) -> Result<SnapshotPairs> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(&path)?;
    let mut dt: Option<f64> = None;
    let mut seed: Option<u64> = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("dt=") {
                dt = Some(parse_field(&path_str, line_no, v)?);
            } else if let Some(v) = comment.strip_prefix("seed=") {
                seed = v.trim().parse().ok();
            }
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let vals = fields
            .iter()
            .map(|f| parse_field(&path_str, line_no, f))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line_no, vals));
    }
    let header = header.ok_or_else(|| Error::Parse {
        path: path_str.clone(),
        line: 1,
        msg: "missing header row".into(),
    })?;
    if header.len() % 2 != 0 || header.len() < 2 {
        return Err(Error::Parse {
            path: path_str.clone(),
            line: 1,
            msg: format!("header must list x1..xd,y1..yd, got {} columns", header.len()),
        });
    }
    let d = header.len() / 2;
    for (j, name) in header.iter().enumerate() {
        let expect = if j < d {
            format!("x{}", j + 1)
        } else {
            format!("y{}", j - d + 1)
        };
        if name != &expect {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: 1,
                msg: format!("header column {} is '{name}', expected '{expect}'", j + 1),
            });
        }
    }
    let dt = dt.ok_or_else(|| Error::Parse {
        path: path_str.clone(),
        line: 1,
        msg: "missing '# dt=' sidecar line".into(),
    })?;
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path_str.clone(),
            line: 1,
            msg: "no data rows".into(),
        });
    }
    for (line_no, vals) in &rows {
        if vals.len() != 2 * d {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: *line_no,
                msg: format!("row has {} fields, expected {}", vals.len(), 2 * d),
            });
        }
    }
    let m = rows.len();
    let x = Mat::<f64>::from_fn(d, m, |r, c| rows[c].1[r]);
    let y = Mat::<f64>::from_fn(d, m, |r, c| rows[c].1[d + r]);
    Ok(SnapshotPairs {
        x,
        y,
        dt,
        source_seed: seed,
    })
}

/// Density field CSV: `# producer=` and `# grid=` comments, header
/// `t,x1[,x2[,x3]],p`, rows grouped by time in flat grid order.
pub fn write_density_csv(path: impl AsRef<Path>, field: &DensityField) -> Result<()> {
    let d = field.grid.dim();
    let mut out = String::new();
    writeln!(out, "# producer={}", field.producer.as_str()).unwrap();
    let gspec: Vec<String> = field
        .grid
        .dims()
        .iter()
        .map(|g| format!("{}:{}:{}", format_f64(g.lower), format_f64(g.upper), g.n))
        .collect();
    writeln!(out, "# grid={}", gspec.join(",")).unwrap();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|j| format!("x{j}")))
        .chain(std::iter::once("p".to_string()))
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    let mut point = vec![0.0; d];
    for (ti, &t) in field.times.iter().enumerate() {
        for (pi, v) in field.values[ti].iter().enumerate() {
            field.grid.point(pi, &mut point);
            let row: Vec<String> = std::iter::once(format_f64(t))
                .chain(point.iter().map(|&x| format_f64(x)))
                .chain(std::iter::once(format_f64(*v)))
                .collect();
            writeln!(out, "{}", row.join(",")).unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_density_csv(path: impl AsRef<Path>) -> Result<DensityField> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(&path)?;
    let mut producer = Producer::Analytic;
    let mut grid: Option<Grid> = None;
    let mut header_seen = false;
    let mut rows: Vec<(f64, f64)> = Vec::new(); // (t, p), coordinates implied by grid order
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("producer=") {
                producer = Producer::parse(v.trim())?;
            } else if let Some(v) = comment.strip_prefix("grid=") {
                let mut dims = Vec::new();
                for part in v.split(',') {
                    let bits: Vec<&str> = part.split(':').collect();
                    if bits.len() != 3 {
                        return Err(Error::Parse {
                            path: path_str.clone(),
                            line: line_no,
                            msg: format!("bad grid spec '{part}'"),
                        });
                    }
                    let lower = parse_field(&path_str, line_no, bits[0])?;
                    let upper = parse_field(&path_str, line_no, bits[1])?;
                    let n: usize = bits[2].trim().parse().map_err(|_| Error::Parse {
                        path: path_str.clone(),
                        line: line_no,
                        msg: format!("bad grid point count '{}'", bits[2]),
                    })?;
                    dims.push(GridDim { lower, upper, n });
                }
                grid = Some(Grid::new(dims)?);
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: line_no,
                msg: "expected t,coords...,p".into(),
            });
        }
        let t = parse_field(&path_str, line_no, fields[0])?;
        let p = parse_field(&path_str, line_no, fields[fields.len() - 1])?;
        rows.push((t, p));
    }
    let grid = grid.ok_or_else(|| Error::Parse {
        path: path_str.clone(),
        line: 1,
        msg: "missing '# grid=' line".into(),
    })?;
    let np = grid.n_points();
    if rows.is_empty() || rows.len() % np != 0 {
        return Err(Error::Parse {
            path: path_str.clone(),
            line: 1,
            msg: format!("{} data rows is not a multiple of {} grid points", rows.len(), np),
        });
    }
    let n_times = rows.len() / np;
    let mut times = Vec::with_capacity(n_times);
    let mut values = Vec::with_capacity(n_times);
    for ti in 0..n_times {
        let block = &rows[ti * np..(ti + 1) * np];
        let t = block[0].0;
        if block.iter().any(|(bt, _)| *bt != t) {
            return Err(Error::Parse {
                path: path_str.clone(),
                line: 1,
                msg: "rows within a time block carry different times".into(),
            });
        }
        times.push(t);
        values.push(block.iter().map(|(_, p)| *p).collect());
    }
    DensityField::new(grid, times, values, producer)
}

/// Moment series CSV with columns t,dim,order,value.
pub fn write_moments_csv(path: impl AsRef<Path>, series: &MomentSeries) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "t,dim,order,value").unwrap();
    for (ti, &t) in series.times.iter().enumerate() {
        for row in &series.rows {
            writeln!(
                out,
                "{},{},{},{}",
                format_f64(t),
                row.dim,
                row.order,
                format_f64(row.values[ti])
            )
            .unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Particle cloud CSV with columns t,x1..xd.
pub fn write_cloud_csv(path: impl AsRef<Path>, t: f64, cloud: &Mat<f64>) -> Result<()> {
    let d = cloud.nrows();
    let mut out = String::new();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|j| format!("x{j}")))
        .collect();
    writeln!(out, "{}", header.join(",")).unwrap();
    for c in 0..cloud.ncols() {
        let row: Vec<String> = std::iter::once(format_f64(t))
            .chain((0..d).map(|r| format_f64(cloud[(r, c)])))
            .collect();
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Error report CSV with per-time rows and a trailing aggregate row.
pub fn write_error_csv(path: impl AsRef<Path>, report: &crate::oracle::ErrorReport) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "t,rel_l2,l1,linf").unwrap();
    for e in &report.per_time {
        writeln!(
            out,
            "{},{},{},{}",
            format_f64(e.t),
            format_f64(e.rel_l2),
            format_f64(e.l1),
            format_f64(e.linf)
        )
        .unwrap();
    }
    writeln!(
        out,
        "aggregate,{},{},{}",
        format_f64(report.rel_l2),
        format_f64(report.l1),
        format_f64(report.linf)
    )
    .unwrap();
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// model files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub m: usize,
    pub tool_version: String,
}

pub fn tool_version() -> String {
    format!("dpdd {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum StationarySer {
    Gaussian {
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    Doublewell {
        sigma: f64,
        domain: (f64, f64),
    },
    Kde {
        rule: BandwidthRule,
        bandwidths: Vec<f64>,
        point_scales: Vec<f64>,
        /// d rows of M sample coordinates.
        samples: Vec<Vec<f64>>,
    },
}

fn stationary_to_ser(ps: &StationaryDensity) -> StationarySer {
    match ps {
        StationaryDensity::Gaussian { mean, var } => StationarySer::Gaussian {
            mean: mean.clone(),
            var: var.clone(),
        },
        StationaryDensity::DoubleWell { sigma, domain, .. } => StationarySer::Doublewell {
            sigma: *sigma,
            domain: *domain,
        },
        StationaryDensity::Kde(kde) => StationarySer::Kde {
            rule: kde.rule(),
            bandwidths: kde.bandwidths().to_vec(),
            point_scales: kde.point_scales().to_vec(),
            samples: mat_to_rows(kde.samples()),
        },
    }
}

fn stationary_from_ser(ser: StationarySer) -> Result<StationaryDensity> {
    match ser {
        StationarySer::Gaussian { mean, var } => StationaryDensity::gaussian(mean, var),
        StationarySer::Doublewell { sigma, domain } => StationaryDensity::double_well(sigma, domain),
        StationarySer::Kde {
            rule,
            bandwidths,
            point_scales,
            samples,
        } => {
            let mat = rows_to_mat(&samples)?;
            Ok(StationaryDensity::Kde(KdeDensity::from_parts(
                mat,
                bandwidths,
                point_scales,
                rule,
            )?))
        }
    }
}

fn mat_to_rows(m: faer::MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn rows_to_mat(rows: &[Vec<f64>]) -> Result<Mat<f64>> {
    if rows.is_empty() {
        return Err(Error::input("empty matrix in model file"));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::input("ragged matrix in model file"));
    }
    Ok(Mat::<f64>::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Serialized spectral forecaster (eigenpairs, stationary density,
/// coefficients, training samples).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralModelFile {
    pub format: String,
    pub dict: Vec<TermSpec>,
    pub dim: usize,
    pub dt: f64,
    pub rank: usize,
    pub k_matrix: Vec<Vec<f64>>,
    pub mu_re: Vec<f64>,
    pub mu_im: Vec<f64>,
    pub lambda_re: Vec<f64>,
    pub lambda_im: Vec<f64>,
    pub xi_re: Vec<Vec<f64>>,
    pub xi_im: Vec<Vec<f64>>,
    pub c0_re: Vec<f64>,
    pub c0_im: Vec<f64>,
    stationary: StationarySer,
    pub train_x: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

fn all_finite(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}

pub fn save_spectral_model(
    path: impl AsRef<Path>,
    model: &SpectralForecastModel,
    provenance: Provenance,
) -> Result<()> {
    let k = &model.koopman;
    let finite = all_finite(k.mu.iter().flat_map(|c| [c.re, c.im]))
        && all_finite(k.lambda.iter().flat_map(|c| [c.re, c.im]))
        && all_finite(k.xi.iter().flatten().flat_map(|c| [c.re, c.im]))
        && all_finite(model.c0.iter().flat_map(|c| [c.re, c.im]));
    if !finite {
        return Err(Error::Numerical(
            "model contains non-finite values and cannot be saved".into(),
        ));
    }
    let file = SpectralModelFile {
        format: "dpdd-spectral-model/1".into(),
        dict: k.dict.terms().to_vec(),
        dim: k.dim_state(),
        dt: k.dt,
        rank: k.rank,
        k_matrix: mat_to_rows(k.k.as_ref()),
        mu_re: k.mu.iter().map(|c| c.re).collect(),
        mu_im: k.mu.iter().map(|c| c.im).collect(),
        lambda_re: k.lambda.iter().map(|c| c.re).collect(),
        lambda_im: k.lambda.iter().map(|c| c.im).collect(),
        xi_re: k.xi.iter().map(|x| x.iter().map(|c| c.re).collect()).collect(),
        xi_im: k.xi.iter().map(|x| x.iter().map(|c| c.im).collect()).collect(),
        c0_re: model.c0.iter().map(|c| c.re).collect(),
        c0_im: model.c0.iter().map(|c| c.im).collect(),
        stationary: stationary_to_ser(&model.ps),
        train_x: mat_to_rows(model.train_x.as_ref()),
        diagnostics: k.diagnostics.clone(),
        provenance,
    };
    let json = serde_json::to_string_pretty(&file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_spectral_model(path: impl AsRef<Path>) -> Result<(SpectralForecastModel, Provenance)> {
    let text = fs::read_to_string(&path)?;
    let file: SpectralModelFile = serde_json::from_str(&text)?;
    if file.format != "dpdd-spectral-model/1" {
        return Err(Error::input(format!("unrecognized model format '{}'", file.format)));
    }
    let dict = Dictionary::new(file.dict.clone(), file.dim)?;
    let n = dict.n_obs();
    if file.mu_re.len() != n
        || file.lambda_re.len() != n
        || file.xi_re.len() != n
        || file.c0_re.len() != n
    {
        return Err(Error::input("model file arrays do not match the dictionary size"));
    }
    let zip_complex = |re: &[f64], im: &[f64]| -> Vec<Complex64> {
        re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
    };
    let mu = zip_complex(&file.mu_re, &file.mu_im);
    let lambda = zip_complex(&file.lambda_re, &file.lambda_im);
    let xi: Vec<Vec<Complex64>> = file
        .xi_re
        .iter()
        .zip(&file.xi_im)
        .map(|(re, im)| zip_complex(re, im))
        .collect();
    if xi.iter().any(|row| row.len() != n) {
        return Err(Error::input("eigenvector rows do not match the dictionary size"));
    }
    let koopman = KoopmanModel {
        k: rows_to_mat(&file.k_matrix)?,
        dt: file.dt,
        mu,
        lambda,
        xi,
        dict,
        rank: file.rank,
        diagnostics: file.diagnostics.clone(),
    };
    let ps = stationary_from_ser(file.stationary)?;
    let train_x = rows_to_mat(&file.train_x)?;
    if train_x.nrows() != file.dim {
        return Err(Error::input("training samples do not match the state dimension"));
    }
    let c0 = zip_complex(&file.c0_re, &file.c0_im);
    let model = SpectralForecastModel::from_parts(koopman, ps, c0, train_x)?;
    Ok((model, file.provenance))
}

/// Serialized diffusion-forecast model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfModelFile {
    pub format: String,
    pub dim: usize,
    pub dt: f64,
    pub epsilon: f64,
    pub generator_scale: f64,
    pub eigvals: Vec<f64>,
    /// M rows of k eigenfunction values.
    pub eigvecs: Vec<Vec<f64>>,
    pub q_eps: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub c0: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

pub fn save_df_model(path: impl AsRef<Path>, model: &DfModel, provenance: Provenance) -> Result<()> {
    let dm = &model.dm;
    let file = DfModelFile {
        format: "dpdd-df-model/1".into(),
        dim: dm.samples.nrows(),
        dt: model.dt,
        epsilon: dm.epsilon,
        generator_scale: dm.generator_scale,
        eigvals: dm.eigvals.clone(),
        eigvecs: mat_to_rows(dm.eigvecs.as_ref()),
        q_eps: dm.q_eps.clone(),
        b: mat_to_rows(model.b.as_ref()),
        c0: model.c0_hat.clone(),
        samples: mat_to_rows(dm.samples.as_ref()),
        provenance,
    };
    let json = serde_json::to_string_pretty(&file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_df_model(path: impl AsRef<Path>) -> Result<(DfModel, Provenance)> {
    let text = fs::read_to_string(&path)?;
    let file: DfModelFile = serde_json::from_str(&text)?;
    if file.format != "dpdd-df-model/1" {
        return Err(Error::input(format!("unrecognized model format '{}'", file.format)));
    }
    let samples = rows_to_mat(&file.samples)?;
    let eigvecs = rows_to_mat(&file.eigvecs)?;
    if samples.nrows() != file.dim || eigvecs.nrows() != samples.ncols() {
        return Err(Error::input("df model arrays have inconsistent shapes"));
    }
    let dm = DiffusionMapModel {
        samples,
        epsilon: file.epsilon,
        q_eps: file.q_eps.clone(),
        eigvals: file.eigvals.clone(),
        eigvecs,
        generator_scale: file.generator_scale,
    };
    let model = DfModel::new(dm, rows_to_mat(&file.b)?, file.c0.clone(), file.dt)?;
    Ok((model, file.provenance))
}
