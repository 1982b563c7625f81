//! Tensor grids and time-stamped density fields, the common currency between
//! forecasters, reference solvers, and error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDim {
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

/// Uniform tensor grid over up to three dimensions, endpoints included.
/// Flat indexing is row-major with the last dimension fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: Vec<GridDim>,
}

impl Grid {
    pub fn new(dims: Vec<GridDim>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::input(format!(
                "grids support 1 to 3 dimensions, got {}",
                dims.len()
            )));
        }
        for d in &dims {
            if !(d.lower < d.upper) {
                return Err(Error::input(format!(
                    "grid bounds must satisfy lower < upper, got [{}, {}]",
                    d.lower, d.upper
                )));
            }
            if d.n < 2 {
                return Err(Error::input("each grid dimension needs at least 2 points"));
            }
        }
        Ok(Grid { dims })
    }

    pub fn line(lower: f64, upper: f64, n: usize) -> Result<Self> {
        Grid::new(vec![GridDim { lower, upper, n }])
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[GridDim] {
        &self.dims
    }

    pub fn n_points(&self) -> usize {
        self.dims.iter().map(|d| d.n).product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let d = &self.dims[axis];
        (d.upper - d.lower) / (d.n - 1) as f64
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let d = &self.dims[axis];
        d.lower + self.spacing(axis) * i as f64
    }

    /// Writes the coordinates of flat point `idx` into `out`.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for axis in (0..self.dims.len()).rev() {
            let n = self.dims[axis].n;
            out[axis] = self.coord(axis, rem % n);
            rem /= n;
        }
    }

    /// All grid points as a dim x n_points column matrix (flat order).
    pub fn points_matrix(&self) -> faer::Mat<f64> {
        let d = self.dim();
        let p = self.n_points();
        let mut buf = vec![0.0; d];
        faer::Mat::<f64>::from_fn(d, p, |r, c| {
            if r == 0 {
                self.point(c, &mut buf);
            }
            buf[r]
        })
    }

    /// Trapezoid quadrature weight of flat point `idx`.
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        let mut rem = idx;
        let mut w = 1.0;
        for axis in (0..self.dims.len()).rev() {
            let n = self.dims[axis].n;
            let i = rem % n;
            rem /= n;
            let h = self.spacing(axis);
            w *= if i == 0 || i == n - 1 { 0.5 * h } else { h };
        }
        w
    }

    /// Trapezoid-rule integral of point values in flat order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| self.trapezoid_weight(i) * v)
            .sum()
    }
}

/// Which pipeline produced a density field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Producer {
    Dpdd,
    Df,
    Fpe,
    Ensemble,
    Analytic,
}

impl Producer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Producer::Dpdd => "dpdd",
            Producer::Df => "df",
            Producer::Fpe => "fpe",
            Producer::Ensemble => "ensemble",
            Producer::Analytic => "analytic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dpdd" => Ok(Producer::Dpdd),
            "df" => Ok(Producer::Df),
            "fpe" => Ok(Producer::Fpe),
            "ensemble" => Ok(Producer::Ensemble),
            "analytic" => Ok(Producer::Analytic),
            other => Err(Error::input(format!("unknown producer tag '{other}'"))),
        }
    }
}

/// Per-time density values over a grid.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub grid: Grid,
    pub times: Vec<f64>,
    /// One value vector (flat grid order) per time.
    pub values: Vec<Vec<f64>>,
    pub producer: Producer,
}

impl DensityField {
    pub fn new(grid: Grid, times: Vec<f64>, values: Vec<Vec<f64>>, producer: Producer) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::input("density field needs one value set per time"));
        }
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::input("density field times must be strictly ascending"));
            }
        }
        let p = grid.n_points();
        for (i, v) in values.iter().enumerate() {
            if v.len() != p {
                return Err(Error::input(format!(
                    "time {i}: {} values for {} grid points",
                    v.len(),
                    p
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("time {i}: non-finite density value")));
            }
        }
        Ok(DensityField {
            grid,
            times,
            values,
            producer,
        })
    }

    /// Grid integral (trapezoid) of the field at time index `ti`.
    pub fn mass(&self, ti: usize) -> f64 {
        self.grid.integrate(&self.values[ti])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_grid_coords_and_weights() {
        let g = Grid::line(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.n_points(), 5);
        assert_eq!(g.coord(0, 0), -1.0);
        assert_eq!(g.coord(0, 4), 1.0);
        assert!((g.spacing(0) - 0.5).abs() < 1e-15);
        // trapezoid over constant 1 equals the interval length
        let ones = vec![1.0; 5];
        assert!((g.integrate(&ones) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_grid_flat_order() {
        let g = Grid::new(vec![
            GridDim { lower: 0.0, upper: 1.0, n: 2 },
            GridDim { lower: 0.0, upper: 2.0, n: 3 },
        ])
        .unwrap();
        assert_eq!(g.n_points(), 6);
        let mut p = [0.0; 2];
        g.point(0, &mut p);
        assert_eq!(p, [0.0, 0.0]);
        g.point(1, &mut p);
        assert_eq!(p, [0.0, 1.0]); // last dimension fastest
        g.point(3, &mut p);
        assert_eq!(p, [1.0, 0.0]);
        // integral of 1 over the [0,1] x [0,2] box
        let ones = vec![1.0; 6];
        assert!((g.integrate(&ones) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::line(1.0, 1.0, 4).is_err());
        assert!(Grid::line(0.0, 1.0, 1).is_err());
        assert!(Grid::new(vec![]).is_err());
        let d = GridDim { lower: 0.0, upper: 1.0, n: 2 };
        assert!(Grid::new(vec![d; 4]).is_err());
    }

    #[test]
    fn field_validation() {
        let g = Grid::line(0.0, 1.0, 3).unwrap();
        assert!(DensityField::new(g.clone(), vec![0.0, 1.0], vec![vec![1.0; 3]; 2], Producer::Analytic).is_ok());
        assert!(DensityField::new(g.clone(), vec![1.0, 0.0], vec![vec![1.0; 3]; 2], Producer::Analytic).is_err());
        assert!(DensityField::new(g.clone(), vec![0.0], vec![vec![1.0; 2]], Producer::Analytic).is_err());
        assert!(DensityField::new(g, vec![0.0], vec![vec![f64::NAN; 3]], Producer::Analytic).is_err());
    }
}
