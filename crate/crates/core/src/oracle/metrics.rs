//! Error metrics between density fields on a common grid.

use crate::density::DensityField;
use crate::error::{Error, Result};

/// Per-time and aggregated error norms. `rel_l2` is |c - r|_2 / |r|_2 on the
/// flat grid values; `l1` and `linf` are plain vector norms of the
/// difference. Aggregates are maxima over times.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub per_time: Vec<TimeError>,
    pub rel_l2: f64,
    pub l1: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TimeError {
    pub t: f64,
    pub rel_l2: f64,
    pub l1: f64,
    pub linf: f64,
}

pub fn error_metrics(candidate: &DensityField, reference: &DensityField) -> Result<ErrorReport> {
    if candidate.grid != reference.grid {
        return Err(Error::input("density fields live on different grids"));
    }
    if candidate.times.len() != reference.times.len()
        || candidate
            .times
            .iter()
            .zip(&reference.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::input("density fields have different time stamps"));
    }
    let mut per_time = Vec::with_capacity(candidate.times.len());
    for (ti, &t) in candidate.times.iter().enumerate() {
        let c = &candidate.values[ti];
        let r = &reference.values[ti];
        let mut diff2 = 0.0;
        let mut ref2 = 0.0;
        let mut l1 = 0.0;
        let mut linf: f64 = 0.0;
        for (cv, rv) in c.iter().zip(r) {
            let d = cv - rv;
            diff2 += d * d;
            ref2 += rv * rv;
            l1 += d.abs();
            linf = linf.max(d.abs());
        }
        let rel_l2 = if ref2 > 0.0 {
            (diff2 / ref2).sqrt()
        } else {
            diff2.sqrt()
        };
        per_time.push(TimeError { t, rel_l2, l1, linf });
    }
    let agg = |f: fn(&TimeError) -> f64| per_time.iter().map(f).fold(0.0f64, f64::max);
    Ok(ErrorReport {
        rel_l2: agg(|e| e.rel_l2),
        l1: agg(|e| e.l1),
        linf: agg(|e| e.linf),
        per_time,
    })
}
