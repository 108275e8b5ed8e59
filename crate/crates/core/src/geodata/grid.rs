use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::VariableId;
use crate::{Result, WamError};

/// Position of a coordinate inside a strictly monotone axis: the lower cell
/// index and the fractional offset towards the next one.
pub(crate) fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n == 1 {
        return ((x - axis[0]).abs() <= 1e-9).then_some((0, 0.0));
    }
    let ascending = axis[1] > axis[0];
    let (lo, hi) = if ascending {
        (axis[0], axis[n - 1])
    } else {
        (axis[n - 1], axis[0])
    };
    let tol = 1e-9 * (hi - lo).abs().max(1.0);
    if x < lo - tol || x > hi + tol {
        return None;
    }
    // first index whose coordinate lies beyond x in the direction of travel
    let beyond = if ascending {
        axis.partition_point(|&a| a <= x)
    } else {
        axis.partition_point(|&a| a >= x)
    };
    let i = beyond.clamp(1, n - 1) - 1;
    let t = ((x - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
    Some((i, t))
}

/// Index of the axis cell whose centre is nearest to `x`, if `x` lies within
/// half a cell of the axis range.
pub(crate) fn nearest_cell(axis: &[f64], x: f64) -> Option<usize> {
    let n = axis.len();
    let half = if n > 1 { (axis[1] - axis[0]).abs() / 2.0 } else { 0.5 };
    let (best, dist) = axis
        .iter()
        .enumerate()
        .map(|(i, &a)| (i, (a - x).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    (dist <= half * (1.0 + 1e-9)).then_some(best)
}

pub(crate) fn check_axis(name: &str, axis: &[f64], range: Option<f64>) -> Result<()> {
    if axis.is_empty() {
        return Err(WamError::InvalidGrid(format!("{name} axis is empty")));
    }
    if axis.iter().any(|a| !a.is_finite()) {
        return Err(WamError::InvalidGrid(format!("{name} axis has non-finite values")));
    }
    if axis.len() > 1 {
        let up = axis[1] > axis[0];
        let monotone = axis.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] });
        if !monotone {
            return Err(WamError::InvalidGrid(format!("{name} axis is not strictly monotone")));
        }
    }
    if let Some(limit) = range {
        if axis.iter().any(|a| a.abs() > limit) {
            return Err(WamError::InvalidGrid(format!(
                "{name} axis exceeds ±{limit} decimal degrees"
            )));
        }
    }
    Ok(())
}

/// A georeferenced scalar field on a decimal-degree lattice. Values are
/// row-major with rows following `lat`; missing cells are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoGrid {
    pub variable: VariableId,
    pub units: String,
    pub timestamp: NaiveDateTime,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub values: Vec<f64>,
}

impl GeoGrid {
    pub fn new(
        variable: VariableId,
        units: impl Into<String>,
        timestamp: NaiveDateTime,
        lat: Vec<f64>,
        lon: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let g = GeoGrid {
            variable,
            units: units.into(),
            timestamp,
            lat,
            lon,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("latitude", &self.lat, Some(90.0))?;
        check_axis("longitude", &self.lon, Some(180.0))?;
        if self.values.len() != self.lat.len() * self.lon.len() {
            return Err(WamError::InvalidGrid(format!(
                "{} values for a {}×{} grid",
                self.values.len(),
                self.lat.len(),
                self.lon.len()
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.lat.len()
    }

    pub fn cols(&self) -> usize {
        self.lon.len()
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.lon.len() + col]
    }

    /// Copy of this grid with new values on the same axes.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        GeoGrid { values, ..self.clone() }
    }
}

/// Hemisphere of a UTM zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hemisphere {
    North,
    South,
}

/// A scalar field on a UTM easting/northing lattice (metres). Rows follow
/// `northing`.
#[derive(Clone, Debug, PartialEq)]
pub struct UtmGrid {
    pub variable: VariableId,
    pub units: String,
    pub timestamp: NaiveDateTime,
    pub zone: u8,
    pub hemisphere: Hemisphere,
    pub northing: Vec<f64>,
    pub easting: Vec<f64>,
    pub values: Vec<f64>,
}

impl UtmGrid {
    pub fn validate(&self) -> Result<()> {
        if !(1..=60).contains(&self.zone) {
            return Err(WamError::InvalidZone(self.zone));
        }
        check_axis("northing", &self.northing, None)?;
        check_axis("easting", &self.easting, None)?;
        if self.values.len() != self.northing.len() * self.easting.len() {
            return Err(WamError::InvalidGrid(format!(
                "{} values for a {}×{} grid",
                self.values.len(),
                self.northing.len(),
                self.easting.len()
            )));
        }
        Ok(())
    }
}
