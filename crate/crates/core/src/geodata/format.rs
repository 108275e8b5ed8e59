//! Headered plain-text grid files and the TOML manifest listing them.
//!
//! ```text
//! variable = u10
//! units = m s-1
//! timestamp = 2021-06-01T12:00:00
//! crs = geographic            (or: utm 30N / utm 30S)
//! rows = 2
//! cols = 3
//! row_axis = 42 42.02         (latitude, or northing for utm)
//! col_axis = -4 -3.98 -3.96   (longitude, or easting for utm)
//! data
//! 0.1 0.2 nan
//! 0.4 0.5 0.6
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{GeoGrid, GridStore, Hemisphere, RegionAxes, UtmGrid, VariableId};
use crate::{Result, WamError};

const TIMESTAMP: &str = "%Y-%m-%dT%H:%M:%S";

/// A grid file in either coordinate system.
#[derive(Clone, Debug, PartialEq)]
pub enum GridFile {
    Geo(GeoGrid),
    Utm(UtmGrid),
}

impl GridFile {
    pub fn variable(&self) -> VariableId {
        match self {
            GridFile::Geo(g) => g.variable,
            GridFile::Utm(g) => g.variable,
        }
    }

    pub fn timestamp(&self) -> NaiveDateTime {
        match self {
            GridFile::Geo(g) => g.timestamp,
            GridFile::Utm(g) => g.timestamp,
        }
    }
}

fn fmt_value(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else {
        write!(out, "{v}").expect("string write");
    }
}

fn fmt_row(out: &mut String, values: &[f64]) {
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        fmt_value(out, v);
    }
    out.push('\n');
}

/// Serializes a grid; floats use the shortest round-trip form.
pub fn write_grid_text(grid: &GridFile) -> String {
    let (variable, units, timestamp, crs, rows, cols, values) = match grid {
        GridFile::Geo(g) => (
            g.variable,
            &g.units,
            g.timestamp,
            "geographic".to_string(),
            &g.lat,
            &g.lon,
            &g.values,
        ),
        GridFile::Utm(g) => {
            let h = match g.hemisphere {
                Hemisphere::North => 'N',
                Hemisphere::South => 'S',
            };
            (
                g.variable,
                &g.units,
                g.timestamp,
                format!("utm {}{h}", g.zone),
                &g.northing,
                &g.easting,
                &g.values,
            )
        }
    };
    let mut out = String::new();
    writeln!(out, "variable = {variable}").expect("string write");
    writeln!(out, "units = {units}").expect("string write");
    writeln!(out, "timestamp = {}", timestamp.format(TIMESTAMP)).expect("string write");
    writeln!(out, "crs = {crs}").expect("string write");
    writeln!(out, "rows = {}", rows.len()).expect("string write");
    writeln!(out, "cols = {}", cols.len()).expect("string write");
    out.push_str("row_axis = ");
    fmt_row(&mut out, rows);
    out.push_str("col_axis = ");
    fmt_row(&mut out, cols);
    out.push_str("data\n");
    for r in values.chunks(cols.len()) {
        fmt_row(&mut out, r);
    }
    out
}

fn parse_floats(ctx: &str, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| WamError::parse(ctx.to_string(), format!("`{t}`: {e}")))
        })
        .collect()
}

fn parse_crs(ctx: &str, s: &str) -> Result<Option<(u8, Hemisphere)>> {
    if s == "geographic" {
        return Ok(None);
    }
    let bad = || WamError::parse(ctx.to_string(), format!("unknown crs `{s}`"));
    let zone = s.strip_prefix("utm ").ok_or_else(bad)?;
    let (num, hemi) = zone.split_at(zone.len().saturating_sub(1));
    let hemisphere = match hemi {
        "N" => Hemisphere::North,
        "S" => Hemisphere::South,
        _ => return Err(bad()),
    };
    let zone: u8 = num.parse().map_err(|_| bad())?;
    if !(1..=60).contains(&zone) {
        return Err(WamError::InvalidZone(zone));
    }
    Ok(Some((zone, hemisphere)))
}

/// Parses a grid file; `ctx` names the source in errors.
pub fn parse_grid_text(ctx: &str, text: &str) -> Result<GridFile> {
    let mut lines = text.lines();
    let mut header = std::collections::HashMap::new();
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "data" {
            break;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| WamError::parse(ctx.to_string(), format!("malformed header line `{line}`")))?;
        header.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        header
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| WamError::parse(ctx.to_string(), format!("missing header key `{k}`")))
    };
    let variable: VariableId = get("variable")?.parse()?;
    let units = get("units")?.to_string();
    let timestamp = NaiveDateTime::parse_from_str(get("timestamp")?, TIMESTAMP)
        .map_err(|e| WamError::parse(ctx.to_string(), format!("timestamp: {e}")))?;
    let crs = parse_crs(ctx, get("crs")?)?;
    let count = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|e| WamError::parse(ctx.to_string(), format!("{k}: {e}")))
    };
    let (rows, cols) = (count("rows")?, count("cols")?);
    let row_axis = parse_floats(ctx, get("row_axis")?)?;
    let col_axis = parse_floats(ctx, get("col_axis")?)?;
    if row_axis.len() != rows || col_axis.len() != cols {
        return Err(WamError::parse(ctx.to_string(), "axis length disagrees with rows/cols"));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let row = parse_floats(ctx, line)?;
        if row.len() != cols {
            return Err(WamError::parse(
                ctx.to_string(),
                format!("data row has {} values, expected {cols}", row.len()),
            ));
        }
        values.extend(row);
    }
    if values.len() != rows * cols {
        return Err(WamError::parse(
            ctx.to_string(),
            format!("{} data rows, expected {rows}", values.len() / cols.max(1)),
        ));
    }
    Ok(match crs {
        None => GridFile::Geo(GeoGrid::new(variable, units, timestamp, row_axis, col_axis, values)?),
        Some((zone, hemisphere)) => {
            let g = UtmGrid {
                variable,
                units,
                timestamp,
                zone,
                hemisphere,
                northing: row_axis,
                easting: col_axis,
                values,
            };
            g.validate()?;
            GridFile::Utm(g)
        }
    })
}

pub fn read_grid(path: &Path) -> Result<GridFile> {
    let text = std::fs::read_to_string(path).map_err(|e| WamError::io(path, e))?;
    parse_grid_text(&path.display().to_string(), &text)
}

pub fn write_grid(path: &Path, grid: &GridFile) -> Result<()> {
    std::fs::write(path, write_grid_text(grid)).map_err(|e| WamError::io(path, e))
}

/// Regular axis given by its first coordinate, spacing and length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.start + self.step * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub lat: AxisSpec,
    pub lon: AxisSpec,
}

impl RegionSpec {
    pub fn axes(&self) -> RegionAxes {
        RegionAxes {
            lat: self.lat.values(),
            lon: self.lon.values(),
        }
    }
}

/// Provenance of generated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInfo {
    pub seed: u64,
    pub generator: String,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub path: PathBuf,
}

/// Region definition plus the grid files that populate it. Grid paths are
/// relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub region: RegionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticInfo>,
    #[serde(default, rename = "grid")]
    pub grids: Vec<GridEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WamError::io(path, e))?;
        toml::from_str(&text).map_err(|e| WamError::parse(path.display().to_string(), e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| WamError::parse("manifest", e.to_string()))?;
        std::fs::write(path, text).map_err(|e| WamError::io(path, e))
    }

    /// Reads every listed grid and harmonizes it onto the region.
    pub fn load_store(&self, base: &Path) -> Result<GridStore> {
        let mut store = GridStore::new(self.region.axes())?;
        for entry in &self.grids {
            match read_grid(&base.join(&entry.path))? {
                GridFile::Geo(g) => store.ingest(&g)?,
                GridFile::Utm(g) => store.ingest_utm(&g)?,
            }
        }
        Ok(store)
    }
}

/// Loads a manifest and its grids.
pub fn load_region(manifest: &Path) -> Result<(Manifest, GridStore)> {
    let m = Manifest::read(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let store = m.load_store(base)?;
    Ok((m, store))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts() -> NaiveDateTime {
        chrono::NaiveDate::from_ymd_opt(2021, 6, 11)
            .unwrap()
            .and_hms_opt(18, 0, 0)
            .unwrap()
    }

    #[test]
    fn geo_grid_round_trip_is_exact() {
        let g = GeoGrid::new(
            VariableId::Dewpoint,
            "K",
            ts(),
            vec![42.0, 42.02],
            vec![-4.0, -3.98, -3.96],
            vec![0.1, 1.0 / 3.0, f64::NAN, -2.5e-7, 1e300, 7.0],
        )
        .unwrap();
        let text = write_grid_text(&GridFile::Geo(g.clone()));
        let GridFile::Geo(back) = parse_grid_text("t", &text).unwrap() else {
            panic!()
        };
        assert_eq!(back.lat, g.lat);
        assert_eq!(back.lon, g.lon);
        assert_eq!(back.timestamp, g.timestamp);
        for (a, b) in back.values.iter().zip(&g.values) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn utm_grid_round_trip() {
        let g = UtmGrid {
            variable: VariableId::Gi,
            units: "1".into(),
            timestamp: ts(),
            zone: 30,
            hemisphere: Hemisphere::North,
            northing: vec![4_600_000.0, 4_601_500.0],
            easting: vec![350_000.0],
            values: vec![0.2, -0.1],
        };
        let text = write_grid_text(&GridFile::Utm(g.clone()));
        assert!(text.contains("crs = utm 30N"));
        assert_eq!(parse_grid_text("t", &text).unwrap(), GridFile::Utm(g));
    }

    #[test]
    fn errors_name_the_problem() {
        let err = parse_grid_text("f.grid", "variable = u10\ndata\n").unwrap_err();
        assert!(err.to_string().contains("missing header key `units`"), "{err}");
        let err = parse_grid_text("f.grid", "variable = evap\n").unwrap_err();
        assert!(err.to_string().contains("evap"));
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            region: RegionSpec {
                lat: AxisSpec {
                    start: 42.0,
                    step: 0.02,
                    count: 10,
                },
                lon: AxisSpec {
                    start: -4.0,
                    step: 0.02,
                    count: 12,
                },
            },
            synthetic: Some(SyntheticInfo {
                seed: 7,
                generator: "wam-synth".into(),
                note: "synthetic".into(),
            }),
            grids: vec![GridEntry {
                path: "grids/a.grid".into(),
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.toml");
        m.write(&p).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
    }
}
