//! Intensity families given as a rectangular `(θ, t)` table with bilinear
//! interpolation.
//!
//! CSV layout: header `theta,t,lambda`, rows sorted by `(theta, t)`, every
//! θ row carrying the same t-grid, which starts at 0 and ends at τ.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{IntensityFamily, IntensityModel};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    theta: f64,
    t: f64,
    lambda: f64,
}

#[derive(Debug, Clone)]
pub struct IntensityTable {
    thetas: Vec<f64>,
    ts: Vec<f64>,
    /// Row-major `thetas.len() × ts.len()`.
    values: Vec<f64>,
    /// Node derivatives in θ by central differences (one-sided at the ends).
    slopes: Vec<f64>,
}

fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let last = grid.len() - 1;
    let i = grid.partition_point(|&g| g <= x).clamp(1, last) - 1;
    let w = ((x - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    (i, w)
}

impl IntensityTable {
    pub fn new(thetas: Vec<f64>, ts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if thetas.len() < 2 || ts.len() < 2 {
            return Err(Error::Format("table needs at least two θ and two t values".into()));
        }
        if values.len() != thetas.len() * ts.len() {
            return Err(Error::Format(format!(
                "table is not rectangular: {} values for {}×{} grid",
                values.len(),
                thetas.len(),
                ts.len()
            )));
        }
        if thetas.windows(2).any(|w| !(w[0] < w[1])) || ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Format("table grids must be strictly increasing".into()));
        }
        if ts[0] != 0.0 {
            return Err(Error::Format(format!("t-grid must start at 0, found {}", ts[0])));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Format(format!("intensity value {v} is not positive")));
        }
        let nt = ts.len();
        let last = thetas.len() - 1;
        let mut slopes = vec![0.0; values.len()];
        for i in 0..=last {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(last));
            for j in 0..nt {
                slopes[i * nt + j] = (values[hi * nt + j] - values[lo * nt + j]) / (thetas[hi] - thetas[lo]);
            }
        }
        Ok(IntensityTable { thetas, ts, values, slopes })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["theta", "t", "lambda"] {
            return Err(Error::Format(format!(
                "expected header `theta,t,lambda`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows: Vec<Row> = csv.deserialize().collect::<std::result::Result<_, _>>()?;
        let Some(first) = rows.first() else {
            return Err(Error::Format("table has no rows".into()));
        };
        let mut thetas = vec![first.theta];
        for r in &rows[1..] {
            if r.theta != *thetas.last().unwrap() {
                thetas.push(r.theta);
            }
        }
        let nt = rows.len() / thetas.len();
        if nt * thetas.len() != rows.len() {
            return Err(Error::Format("table rows do not form a rectangular grid".into()));
        }
        let ts: Vec<f64> = rows[..nt].iter().map(|r| r.t).collect();
        for (k, r) in rows.iter().enumerate() {
            if r.theta != thetas[k / nt] || r.t != ts[k % nt] {
                return Err(Error::Format(format!(
                    "row {} (theta={}, t={}) breaks the (theta, t) ordering or grid",
                    k + 2,
                    r.theta,
                    r.t
                )));
            }
        }
        Self::new(thetas, ts, rows.into_iter().map(|r| r.lambda).collect())
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let nt = self.ts.len();
        for (k, &lambda) in self.values.iter().enumerate() {
            csv.serialize(Row { theta: self.thetas[k / nt], t: self.ts[k % nt], lambda })?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Tabulate a family on the given grids.
    pub fn sample(family: &dyn IntensityFamily, thetas: &[f64], ts: &[f64]) -> Result<Self> {
        let values = thetas.iter().flat_map(|&th| ts.iter().map(move |&t| family.lambda(th, t))).collect();
        Self::new(thetas.to_vec(), ts.to_vec(), values)
    }

    pub fn tau(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    fn bilinear(&self, grid: &[f64], theta: f64, t: f64) -> f64 {
        let nt = self.ts.len();
        let (i, wi) = locate(&self.thetas, theta);
        let (j, wj) = locate(&self.ts, t);
        let at = |a: usize, b: usize| grid[a * nt + b];
        let lo = at(i, j) * (1.0 - wj) + at(i, j + 1) * wj;
        let hi = at(i + 1, j) * (1.0 - wj) + at(i + 1, j + 1) * wj;
        lo * (1.0 - wi) + hi * wi
    }

    /// Wrap into a registered model over `[θ_first, θ_last) × [0, t_last]`
    /// with `λ_min` the smallest table value.
    pub fn into_model(self, name: impl Into<String>) -> Result<IntensityModel> {
        let theta1 = self.thetas[0];
        let b = *self.thetas.last().unwrap();
        let tau = self.tau();
        let lambda_min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        IntensityModel::new(name, theta1, b, tau, lambda_min, Arc::new(self))
    }
}

impl IntensityFamily for IntensityTable {
    fn lambda(&self, theta: f64, t: f64) -> f64 {
        self.bilinear(&self.values, theta, t)
    }

    fn dlambda(&self, theta: f64, t: f64) -> f64 {
        self.bilinear(&self.slopes, theta, t)
    }

    /// Piecewise linear in `t`, so the maximum sits on a t-node.
    fn lambda_max(&self, theta: f64) -> f64 {
        self.ts.iter().map(|&t| self.lambda(theta, t)).fold(f64::NEG_INFINITY, f64::max)
    }
}
