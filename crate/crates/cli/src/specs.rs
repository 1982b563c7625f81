//! Parsers for the compact CLI spec strings: dictionaries, stationary
//! densities, initial densities, grids, time lists, and model parameters.

use std::collections::BTreeMap;

use dpdd_core::density::{
    GaussianSpec, Grid, GridDim, InitialDensity, StationaryDensity,
};
use dpdd_core::dict::{hermite_dict, linear_power_dict, monomial_dict, Dictionary};
use dpdd_core::error::{Error, Result};

/// `monomial:<deg>`, `hermite:<deg>`, or
/// `linpow:w1,..,wd:p[;w1,..,wd:p]...` (constant prepended).
pub fn parse_dict(spec: &str, dim: usize) -> Result<Dictionary> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::input(format!("bad dictionary spec '{spec}'")))?;
    match kind {
        "monomial" => {
            let deg: u32 = rest
                .parse()
                .map_err(|_| Error::input(format!("bad monomial degree '{rest}'")))?;
            monomial_dict(dim, deg)
        }
        "hermite" => {
            if dim != 1 {
                return Err(Error::input("hermite dictionaries are 1-D only"));
            }
            let deg: u32 = rest
                .parse()
                .map_err(|_| Error::input(format!("bad hermite degree '{rest}'")))?;
            hermite_dict(deg)
        }
        "linpow" => {
            let mut terms = Vec::new();
            for group in rest.split(';') {
                let (wpart, ppart) = group
                    .rsplit_once(':')
                    .ok_or_else(|| Error::input(format!("bad linpow group '{group}'")))?;
                let weights = parse_f64_list(wpart)?;
                if weights.len() != dim {
                    return Err(Error::input(format!(
                        "linpow group '{group}' has {} weights, state dimension is {dim}",
                        weights.len()
                    )));
                }
                let power: u32 = ppart
                    .parse()
                    .map_err(|_| Error::input(format!("bad linpow power '{ppart}'")))?;
                terms.push((weights, power));
            }
            linear_power_dict(dim, &terms)
        }
        other => Err(Error::input(format!(
            "unknown dictionary kind '{other}'; use monomial:<deg>, hermite:<deg>, or linpow:..."
        ))),
    }
}

/// `analytic:gaussian`, `analytic:doublewell[:sigma]`, `kde:silverman`,
/// `kde:knn`.
pub enum StationarySpec {
    Analytic(StationaryDensity),
    Kde(dpdd_core::density::BandwidthRule),
}

pub fn parse_stationary(spec: &str, dim: usize) -> Result<StationarySpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["analytic", "gaussian"] => Ok(StationarySpec::Analytic(
            StationaryDensity::standard_gaussian(dim),
        )),
        ["analytic", "doublewell"] => Ok(StationarySpec::Analytic(
            StationaryDensity::double_well(2.0f64.sqrt(), (-3.5, 3.5))?,
        )),
        ["analytic", "doublewell", sigma] => {
            let s: f64 = sigma
                .parse()
                .map_err(|_| Error::input(format!("bad sigma '{sigma}'")))?;
            Ok(StationarySpec::Analytic(StationaryDensity::double_well(
                s,
                (-3.5, 3.5),
            )?))
        }
        ["kde", "silverman"] => Ok(StationarySpec::Kde(
            dpdd_core::density::BandwidthRule::Silverman,
        )),
        ["kde", "knn"] => Ok(StationarySpec::Kde(
            dpdd_core::density::BandwidthRule::KnnVariable,
        )),
        _ => Err(Error::input(format!(
            "unknown stationary spec '{spec}'; use analytic:gaussian, analytic:doublewell[:sigma], kde:silverman, or kde:knn"
        ))),
    }
}

/// `stationary` or `gaussian:m1[,m2..]:v1[,v2..]` (diagonal covariance).
pub fn parse_p0(spec: &str, dim: usize) -> Result<InitialDensity> {
    if spec == "stationary" {
        return Ok(InitialDensity::Stationary);
    }
    if let Some(rest) = spec.strip_prefix("gaussian:") {
        let (mpart, vpart) = rest
            .split_once(':')
            .ok_or_else(|| Error::input(format!("bad p0 spec '{spec}'")))?;
        let mean = parse_f64_list(mpart)?;
        let var = parse_f64_list(vpart)?;
        if mean.len() != dim || var.len() != dim {
            return Err(Error::input(format!(
                "p0 '{spec}' has dimension {}, model has {dim}",
                mean.len()
            )));
        }
        return Ok(InitialDensity::Gaussian(GaussianSpec::diagonal(mean, var)?));
    }
    Err(Error::input(format!(
        "unknown p0 spec '{spec}'; use stationary or gaussian:<means>:<vars>"
    )))
}

/// `a:b:n[,a2:b2:n2[,a3:b3:n3]]`.
pub fn parse_grid(spec: &str) -> Result<Grid> {
    let mut dims = Vec::new();
    for part in spec.split(',') {
        let bits: Vec<&str> = part.split(':').collect();
        if bits.len() != 3 {
            return Err(Error::input(format!("bad grid spec '{part}'; use a:b:n")));
        }
        let lower: f64 = bits[0]
            .parse()
            .map_err(|_| Error::input(format!("bad grid bound '{}'", bits[0])))?;
        let upper: f64 = bits[1]
            .parse()
            .map_err(|_| Error::input(format!("bad grid bound '{}'", bits[1])))?;
        let n: usize = bits[2]
            .parse()
            .map_err(|_| Error::input(format!("bad grid size '{}'", bits[2])))?;
        dims.push(GridDim { lower, upper, n });
    }
    Grid::new(dims)
}

pub fn parse_f64_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::input(format!("bad number '{s}'")))
        })
        .collect()
}

pub fn parse_u32_list(spec: &str) -> Result<Vec<u32>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::input(format!("bad integer '{s}'")))
        })
        .collect()
}

/// `k1=v1,k2=v2` model parameter overrides.
pub fn parse_params(spec: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    if spec.is_empty() {
        return Ok(out);
    }
    for pair in spec.split(',') {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::input(format!("bad parameter '{pair}'; use key=value")))?;
        let val: f64 = v
            .parse()
            .map_err(|_| Error::input(format!("bad parameter value '{v}'")))?;
        out.insert(k.trim().to_string(), val);
    }
    Ok(out)
}
