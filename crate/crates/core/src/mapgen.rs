//! Sliding-window regional inference and raster output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geodata::{fuse_sample, GridStore, RegionAxes, LABEL_NAMES, NUM_LABELS};
use crate::models::ModelState;
use crate::{Result, WamError};

/// Raster cells evaluated for a region: every `stride`-th row and column of
/// the region lattice, aligned so that the first full window is included.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPlan {
    pub window: usize,
    pub stride: usize,
    /// Region row and column index of every raster row and column.
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Region index range whose window fits, inclusive.
    pub valid_rows: (usize, usize),
    pub valid_cols: (usize, usize),
}

impl WindowPlan {
    pub fn new(region: &RegionAxes, window: usize, stride: usize) -> Result<Self> {
        let (h, w) = (region.rows(), region.cols());
        if window == 0 || stride == 0 {
            return Err(WamError::Config("window and stride must be positive".into()));
        }
        if h < window || w < window {
            return Err(WamError::Config(format!(
                "region of {h}×{w} cells is smaller than the {window}×{window} window"
            )));
        }
        let half = window / 2;
        let offset = half % stride;
        Ok(WindowPlan {
            window,
            stride,
            rows: (offset..h).step_by(stride).collect(),
            cols: (offset..w).step_by(stride).collect(),
            valid_rows: (half, h - window + half),
            valid_cols: (half, w - window + half),
        })
    }

    pub fn defined(&self, r: usize, c: usize) -> bool {
        let (i, j) = (self.rows[r], self.cols[c]);
        (self.valid_rows.0..=self.valid_rows.1).contains(&i) && (self.valid_cols.0..=self.valid_cols.1).contains(&j)
    }

    /// Raster positions whose window fits, in row-major order.
    pub fn centers(&self) -> Vec<(usize, usize)> {
        (0..self.rows.len())
            .flat_map(|r| (0..self.cols.len()).map(move |c| (r, c)))
            .filter(|&(r, c)| self.defined(r, c))
            .collect()
    }
}

/// Region cells `(row, col)` whose full window fits, row-major.
pub fn enumerate_windows(region: &RegionAxes, window: usize) -> Result<Vec<(usize, usize)>> {
    let plan = WindowPlan::new(region, window, 1)?;
    Ok(plan
        .centers()
        .into_iter()
        .map(|(r, c)| (plan.rows[r], plan.cols[c]))
        .collect())
}

/// Undefined border widths in raster cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

/// Denormalized predictions of one label; undefined cells hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct AssessmentRaster {
    pub label: usize,
    pub date: NaiveDate,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub values: Vec<f64>,
    pub frame: Frame,
}

impl AssessmentRaster {
    pub fn rows(&self) -> usize {
        self.lat.len()
    }

    pub fn cols(&self) -> usize {
        self.lon.len()
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    pub fn name(&self) -> &'static str {
        LABEL_NAMES[self.label]
    }

    /// Smallest and largest defined value.
    pub fn range(&self) -> Option<(f64, f64)> {
        let mut it = self.values.iter().copied().filter(|v| !v.is_nan());
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Raster position of the largest defined value; the first wins ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if !v.is_nan() && best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i / self.cols(), i % self.cols()))
    }
}

/// Single-sample prediction at a region cell, the reference every raster
/// cell reproduces.
pub fn predict_cell(
    model: &ModelState,
    store: &GridStore,
    date: NaiveDate,
    row: usize,
    col: usize,
) -> Result<[f64; NUM_LABELS]> {
    let stats = model
        .stats
        .as_ref()
        .ok_or_else(|| WamError::Config("model carries no normalization statistics".into()))?;
    let w = model.config.input_size;
    let center = (store.region.lat[row], store.region.lon[col]);
    let sample = fuse_sample(store, center, date, &stats.inputs, w)?;
    let x = sample.tensor.reshape(&[1, w, w, model.config.channels])?;
    let y = model.predict(&x)?;
    let mut out = [0.0; NUM_LABELS];
    out.copy_from_slice(&y[..NUM_LABELS]);
    Ok(out)
}

/// One raster per label over the region on a date.
///
/// Windows are evaluated independently in parallel and assembled by index.
pub fn predict_raster(
    model: &ModelState,
    store: &GridStore,
    date: NaiveDate,
    stride: usize,
) -> Result<Vec<AssessmentRaster>> {
    let plan = WindowPlan::new(&store.region, model.config.input_size, stride)?;
    store.stack(date)?;
    let centers = plan.centers();
    let preds = centers
        .par_iter()
        .map(|&(r, c)| predict_cell(model, store, date, plan.rows[r], plan.cols[c]))
        .collect::<Result<Vec<_>>>()?;
    let (nr, nc) = (plan.rows.len(), plan.cols.len());
    let defined_rows: Vec<usize> = (0..nr).filter(|&r| (0..nc).any(|c| plan.defined(r, c))).collect();
    let defined_cols: Vec<usize> = (0..nc).filter(|&c| (0..nr).any(|r| plan.defined(r, c))).collect();
    let frame = Frame {
        top: defined_rows[0],
        bottom: nr - 1 - defined_rows[defined_rows.len() - 1],
        left: defined_cols[0],
        right: nc - 1 - defined_cols[defined_cols.len() - 1],
    };
    Ok((0..NUM_LABELS)
        .map(|l| {
            let mut values = vec![f64::NAN; nr * nc];
            for (&(r, c), p) in centers.iter().zip(&preds) {
                values[r * nc + c] = p[l];
            }
            AssessmentRaster {
                label: l,
                date,
                lat: plan.rows.iter().map(|&i| store.region.lat[i]).collect(),
                lon: plan.cols.iter().map(|&j| store.region.lon[j]).collect(),
                values,
                frame,
            }
        })
        .collect())
}

/// Output encoding of a raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterFormat {
    /// 8-bit graymap with an alpha plane flagging undefined cells.
    Graymap,
    /// Lossless `row,col,lat,lon,value` table.
    Csv,
}

impl std::str::FromStr for RasterFormat {
    type Err = WamError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgm" | "pam" | "graymap" => Ok(RasterFormat::Graymap),
            "csv" => Ok(RasterFormat::Csv),
            other => Err(WamError::Unknown {
                kind: "raster format",
                name: other.to_string(),
                known: "pgm, csv".into(),
            }),
        }
    }
}

/// Metadata written next to every raster file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub label: String,
    pub date: NaiveDate,
    pub file: String,
    pub format: String,
    /// Values mapped linearly so that `min` is 0 and `max` is 255.
    pub scale_min: f64,
    pub scale_max: f64,
    pub undefined: String,
    pub rows: usize,
    pub cols: usize,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub frame: Frame,
    /// Provenance note carried over from the region manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Linear 8-bit level of a value within `[lo, hi]`.
pub fn gray_level(v: f64, lo: f64, hi: f64) -> u8 {
    if hi <= lo {
        return 0;
    }
    (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_graymap(r: &AssessmentRaster, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!(
        "P7\nWIDTH {}\nHEIGHT {}\nDEPTH 2\nMAXVAL 255\nTUPLTYPE GRAYSCALE_ALPHA\nENDHDR\n",
        r.cols(),
        r.rows()
    )
    .into_bytes();
    for &v in &r.values {
        if v.is_nan() {
            out.extend_from_slice(&[0, 0]);
        } else {
            out.extend_from_slice(&[gray_level(v, lo, hi), 255]);
        }
    }
    out
}

fn encode_csv(r: &AssessmentRaster) -> String {
    let mut out = String::from("row,col,lat,lon,value\n");
    for (i, &lat) in r.lat.iter().enumerate() {
        for (j, &lon) in r.lon.iter().enumerate() {
            let v = r.at(i, j);
            let cell = if v.is_nan() { String::new() } else { v.to_string() };
            writeln!(out, "{i},{j},{lat},{lon},{cell}").expect("string write");
        }
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| WamError::io(path, e))?;
    f.write_all(bytes).map_err(|e| WamError::io(path, e))
}

/// Writes the raster and its sidecar into `dir`; returns the raster path.
pub fn emit(r: &AssessmentRaster, format: RasterFormat, source: Option<&str>, dir: &Path) -> Result<PathBuf> {
    let (lo, hi) = r
        .range()
        .ok_or_else(|| WamError::Config(format!("raster {} has no defined cells", r.name())))?;
    std::fs::create_dir_all(dir).map_err(|e| WamError::io(dir, e))?;
    let (file, bytes, format_name, undefined) = match format {
        RasterFormat::Graymap => (
            format!("{}.pam", r.name()),
            encode_graymap(r, lo, hi),
            "pam-grayscale-alpha",
            "alpha 0",
        ),
        RasterFormat::Csv => (
            format!("{}.csv", r.name()),
            encode_csv(r).into_bytes(),
            "csv",
            "empty value",
        ),
    };
    let path = dir.join(&file);
    write_file(&path, &bytes)?;
    let sidecar = Sidecar {
        label: r.name().to_string(),
        date: r.date,
        file,
        format: format_name.into(),
        scale_min: lo,
        scale_max: hi,
        undefined: undefined.into(),
        rows: r.rows(),
        cols: r.cols(),
        lat: r.lat.clone(),
        lon: r.lon.clone(),
        frame: r.frame,
        source: source.map(str::to_string),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_file(&dir.join(format!("{}.json", r.name())), json.as_bytes())?;
    Ok(path)
}

/// Reads a raster written in CSV form together with its sidecar.
pub fn read_csv_raster(path: &Path) -> Result<AssessmentRaster> {
    let side_path = path.with_extension("json");
    let text = std::fs::read_to_string(&side_path).map_err(|e| WamError::io(&side_path, e))?;
    let side: Sidecar =
        serde_json::from_str(&text).map_err(|e| WamError::parse(side_path.display().to_string(), e.to_string()))?;
    let label = LABEL_NAMES
        .iter()
        .position(|n| *n == side.label)
        .ok_or_else(|| WamError::parse(side_path.display().to_string(), format!("unknown label {}", side.label)))?;
    let ctx = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?;
    let mut values = vec![f64::NAN; side.rows * side.cols];
    for rec in reader.records() {
        let rec = rec.map_err(|e| WamError::parse(ctx.clone(), e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let r: usize = field(0)
            .parse()
            .map_err(|e| WamError::parse(ctx.clone(), format!("row: {e}")))?;
        let c: usize = field(1)
            .parse()
            .map_err(|e| WamError::parse(ctx.clone(), format!("col: {e}")))?;
        if r >= side.rows || c >= side.cols {
            return Err(WamError::parse(
                ctx.clone(),
                format!("cell ({r}, {c}) outside the raster"),
            ));
        }
        if !field(4).is_empty() {
            values[r * side.cols + c] = field(4)
                .parse()
                .map_err(|e| WamError::parse(ctx.clone(), format!("value: {e}")))?;
        }
    }
    Ok(AssessmentRaster {
        label,
        date: side.date,
        lat: side.lat,
        lon: side.lon,
        values,
        frame: side.frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(h: usize, w: usize) -> RegionAxes {
        RegionAxes::regular(40.0, 0.01, h, -4.0, 0.01, w)
    }

    #[test]
    fn window_counts() {
        assert_eq!(enumerate_windows(&region(130, 130), 128).unwrap().len(), 9);
        assert_eq!(enumerate_windows(&region(128, 128), 128).unwrap(), vec![(64, 64)]);
        assert_eq!(enumerate_windows(&region(40, 35), 32).unwrap().len(), 9 * 4);
        assert!(enumerate_windows(&region(127, 200), 128).is_err());
    }

    #[test]
    fn strided_plan_keeps_the_first_window() {
        let p = WindowPlan::new(&region(40, 40), 32, 4).unwrap();
        assert_eq!(p.rows, (0..40).step_by(4).collect::<Vec<_>>());
        let c = p.centers();
        assert_eq!(c.len(), 9);
        assert_eq!(p.rows[c[0].0], 16);
    }

    #[test]
    fn gray_endpoints() {
        assert_eq!(gray_level(2.0, 2.0, 7.0), 0);
        assert_eq!(gray_level(7.0, 2.0, 7.0), 255);
        assert_eq!(gray_level(4.5, 2.0, 7.0), 128);
    }

    fn raster() -> AssessmentRaster {
        let mut values: Vec<f64> = (0..12).map(|i| (i as f64).sqrt() * 1e3 + 1.0 / 3.0).collect();
        values[0] = f64::NAN;
        values[11] = f64::NAN;
        AssessmentRaster {
            label: 2,
            date: NaiveDate::from_ymd_opt(2021, 7, 1).unwrap(),
            lat: vec![41.0, 41.02, 41.04],
            lon: vec![-5.0, -4.98, -4.96, -4.94],
            values,
            frame: Frame::default(),
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster();
        let path = emit(&r, RasterFormat::Csv, None, dir.path()).unwrap();
        let back = read_csv_raster(&path).unwrap();
        assert_eq!(back.lat, r.lat);
        for (a, b) in back.values.iter().zip(&r.values) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn graymap_scales_and_flags_undefined() {
        let dir = tempfile::tempdir().unwrap();
        let r = raster();
        let path = emit(&r, RasterFormat::Graymap, Some("synthetic"), dir.path()).unwrap();
        let bytes = std::fs::read(path).unwrap();
        let body = &bytes[bytes.len() - 24..];
        assert_eq!(&body[0..2], &[0, 0]);
        assert_eq!(&body[2..4], &[0, 255]);
        assert_eq!(&body[20..22], &[255, 255]);
        assert_eq!(&body[22..24], &[0, 0]);
        let side: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("extinction_time_min.json")).unwrap())
                .unwrap();
        assert_eq!(side.scale_min, r.values[1]);
        assert_eq!(side.undefined, "alpha 0");
        assert_eq!(side.source.as_deref(), Some("synthetic"));
    }
}
