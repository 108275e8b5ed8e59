use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::grid::nearest_cell;
use super::resample::{reproject_utm, resample_bilinear};
use super::temporal::{select_daily_reading, trend_diff};
use super::{GeoGrid, Group, UtmGrid, VariableId, ZScore, CHANNEL_ORDER, NUM_CHANNELS};
use crate::{Result, WamError};

/// Regular decimal-degree lattice every source is harmonized onto.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionAxes {
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
}

impl RegionAxes {
    pub fn regular(lat0: f64, dlat: f64, rows: usize, lon0: f64, dlon: f64, cols: usize) -> Self {
        RegionAxes {
            lat: (0..rows).map(|i| lat0 + dlat * i as f64).collect(),
            lon: (0..cols).map(|j| lon0 + dlon * j as f64).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.lat.len()
    }

    pub fn cols(&self) -> usize {
        self.lon.len()
    }

    /// Cell containing a coordinate.
    pub fn cell_of(&self, lat: f64, lon: f64) -> Option<(usize, usize)> {
        Some((nearest_cell(&self.lat, lat)?, nearest_cell(&self.lon, lon)?))
    }
}

/// The nine harmonized channel grids in effect on one date, stored
/// channel-last.
#[derive(Clone, Debug)]
pub struct ChannelStack {
    pub date: NaiveDate,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ChannelStack {
    /// Raw (un-normalized) `window × window × 9` block whose cell
    /// (window/2, window/2) is `(row, col)`.
    pub fn window(&self, row: usize, col: usize, window: usize) -> Option<Vec<f64>> {
        let half = window / 2;
        let r0 = row.checked_sub(half)?;
        let c0 = col.checked_sub(half)?;
        if r0 + window > self.rows || c0 + window > self.cols {
            return None;
        }
        let mut out = Vec::with_capacity(window * window * NUM_CHANNELS);
        for r in r0..r0 + window {
            let start = (r * self.cols + c0) * NUM_CHANNELS;
            out.extend_from_slice(&self.values[start..start + window * NUM_CHANNELS]);
        }
        Some(out)
    }
}

/// Harmonized grid repository. Read-only once ingestion is done.
#[derive(Debug)]
pub struct GridStore {
    pub region: RegionAxes,
    daily: BTreeMap<(VariableId, NaiveDate), BTreeMap<u32, GeoGrid>>,
    trend: BTreeMap<VariableId, Vec<(NaiveDate, GeoGrid)>>,
    cache: Mutex<HashMap<NaiveDate, Arc<ChannelStack>>>,
}

impl GridStore {
    pub fn new(region: RegionAxes) -> Result<Self> {
        super::grid::check_axis("region latitude", &region.lat, Some(90.0))?;
        super::grid::check_axis("region longitude", &region.lon, Some(180.0))?;
        Ok(GridStore {
            region,
            daily: BTreeMap::new(),
            trend: BTreeMap::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Resamples a decimal grid onto the region and stores it.
    pub fn ingest(&mut self, grid: &GeoGrid) -> Result<()> {
        let h = resample_bilinear(grid, &self.region.lat, &self.region.lon)?;
        self.insert(h)
    }

    /// Reprojects a UTM grid onto the region and stores it.
    pub fn ingest_utm(&mut self, grid: &UtmGrid) -> Result<()> {
        let h = reproject_utm(grid, &self.region.lat, &self.region.lon)?;
        self.insert(h)
    }

    /// Stores a grid already on the region axes.
    pub fn insert(&mut self, grid: GeoGrid) -> Result<()> {
        if grid.lat != self.region.lat || grid.lon != self.region.lon {
            return Err(WamError::InvalidGrid(format!(
                "{} at {} is not on the region axes",
                grid.variable, grid.timestamp
            )));
        }
        self.cache.lock().expect("cache lock").clear();
        let date = grid.timestamp.date();
        match grid.variable.group() {
            Group::Daily => {
                let hour = chrono::Timelike::hour(&grid.timestamp);
                self.daily.entry((grid.variable, date)).or_default().insert(hour, grid);
            }
            Group::Trend => {
                let series = self.trend.entry(grid.variable).or_default();
                let at = series.partition_point(|(d, _)| *d < date);
                if series.get(at).is_some_and(|(d, _)| *d == date) {
                    return Err(WamError::InvalidGrid(format!(
                        "duplicate {} grid on {date}",
                        grid.variable
                    )));
                }
                series.insert(at, (date, grid));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.daily.values().map(|m| m.len()).sum::<usize>() + self.trend.values().map(|s| s.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn channel_grid(&self, variable: VariableId, date: NaiveDate) -> Result<GeoGrid> {
        let missing = || WamError::MissingData {
            variable: variable.name().to_string(),
            date: date.to_string(),
        };
        match (variable.group(), variable) {
            (Group::Daily, _) => {
                let readings = self.daily.get(&(variable, date)).ok_or_else(missing)?;
                Ok(select_daily_reading(readings, variable.name(), date)?.clone())
            }
            (Group::Trend, VariableId::Gi) => {
                let series = self.trend.get(&variable).ok_or_else(missing)?;
                let upto = series.partition_point(|(d, _)| *d <= date);
                let (_, latest) = upto.checked_sub(1).map(|i| &series[i]).ok_or_else(missing)?;
                Ok(impute_mean(latest))
            }
            (Group::Trend, _) => {
                let series = self.trend.get(&variable).ok_or_else(missing)?;
                trend_diff(series, date)
            }
        }
    }

    /// All nine channels for a date, cached.
    pub fn stack(&self, date: NaiveDate) -> Result<Arc<ChannelStack>> {
        if let Some(s) = self.cache.lock().expect("cache lock").get(&date) {
            return Ok(Arc::clone(s));
        }
        let grids = CHANNEL_ORDER
            .iter()
            .map(|&v| self.channel_grid(v, date))
            .collect::<Result<Vec<_>>>()?;
        let (rows, cols) = (self.region.rows(), self.region.cols());
        let mut values = Vec::with_capacity(rows * cols * NUM_CHANNELS);
        for i in 0..rows * cols {
            for g in &grids {
                values.push(g.values[i]);
            }
        }
        let stack = Arc::new(ChannelStack {
            date,
            rows,
            cols,
            values,
        });
        self.cache.lock().expect("cache lock").insert(date, Arc::clone(&stack));
        Ok(stack)
    }

    /// Dates on which every channel can be assembled.
    pub fn sample_dates(&self) -> Vec<NaiveDate> {
        let mut dates: Vec<NaiveDate> = self
            .daily
            .keys()
            .filter(|(v, _)| *v == VariableId::U10)
            .map(|(_, d)| *d)
            .collect();
        dates.dedup();
        dates
            .into_iter()
            .filter(|&d| CHANNEL_ORDER.iter().all(|&v| self.channel_grid(v, d).is_ok()))
            .collect()
    }
}

/// Replaces missing cells by the mean of the defined ones.
fn impute_mean(grid: &GeoGrid) -> GeoGrid {
    let defined: Vec<f64> = grid.values.iter().copied().filter(|v| v.is_finite()).collect();
    if defined.len() == grid.values.len() {
        return grid.clone();
    }
    let mean = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    grid.with_values(
        grid.values
            .iter()
            .map(|&v| if v.is_finite() { v } else { mean })
            .collect(),
    )
}

/// A normalized `window × window × 9` input centred on a coordinate, with
/// its optional label vector in natural units.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedSample {
    pub tensor: wam_grad::Tensor<f32>,
    pub center: (f64, f64),
    pub date: NaiveDate,
    pub label: Option<[f64; 6]>,
}

/// Raw window for a coordinate, or a frame violation when it does not fit.
pub fn raw_window(store: &GridStore, center: (f64, f64), date: NaiveDate, window: usize) -> Result<Vec<f64>> {
    let violation = || WamError::FrameViolation {
        lat: center.0,
        lon: center.1,
        window,
    };
    let (row, col) = store.region.cell_of(center.0, center.1).ok_or_else(violation)?;
    store.stack(date)?.window(row, col, window).ok_or_else(violation)
}

/// z-scores a raw channel-last window into a tensor.
pub fn normalize_window(raw: &[f64], window: usize, stats: &ZScore) -> Result<wam_grad::Tensor<f32>> {
    let data: Vec<f32> = raw
        .iter()
        .enumerate()
        .map(|(i, &v)| stats.apply(i % NUM_CHANNELS, v) as f32)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(WamError::InvalidGrid("non-finite value in fused window".into()));
    }
    Ok(wam_grad::Tensor::new(&[window, window, NUM_CHANNELS], data)?)
}

/// Extracts and normalizes the window centred on `center`.
pub fn fuse_sample(
    store: &GridStore,
    center: (f64, f64),
    date: NaiveDate,
    stats: &ZScore,
    window: usize,
) -> Result<FusedSample> {
    let raw = raw_window(store, center, date, window)?;
    Ok(FusedSample {
        tensor: normalize_window(&raw, window, stats)?,
        center,
        date,
        label: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region() -> RegionAxes {
        RegionAxes::regular(42.0, 0.02, 12, -4.0, 0.02, 10)
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, d).unwrap()
    }

    fn constant_store(value: impl Fn(VariableId, u32) -> f64) -> GridStore {
        let r = region();
        let mut s = GridStore::new(r.clone()).unwrap();
        let n = r.rows() * r.cols();
        for v in CHANNEL_ORDER {
            let stamps: Vec<(u32, u32)> = match v.group() {
                Group::Daily => vec![(11, 12), (11, 18)],
                Group::Trend => vec![(1, 0), (11, 0)],
            };
            for (d, h) in stamps {
                let t = day(d).and_hms_opt(h, 0, 0).unwrap();
                let g = GeoGrid::new(v, "u", t, r.lat.clone(), r.lon.clone(), vec![value(v, d); n]).unwrap();
                s.insert(g).unwrap();
            }
        }
        s
    }

    #[test]
    fn stack_follows_channel_rules() {
        let s = constant_store(|v, d| v.channel() as f64 + d as f64);
        let st = s.stack(day(11)).unwrap();
        let cell = &st.values[..NUM_CHANNELS];
        assert_eq!(cell[0], 11.0);
        assert_eq!(cell[1], 12.0);
        // greenness taken as is, atmospheric trends differenced over 10 days
        assert_eq!(cell[2], 13.0);
        assert!(cell[3..].iter().all(|&x| x == 10.0));
        assert_eq!(s.sample_dates(), vec![day(11)]);
    }

    #[test]
    fn window_shape_and_frame() {
        let s = constant_store(|v, d| v.channel() as f64 * d as f64);
        let raw = raw_window(&s, (42.1, -3.9), day(11), 8).unwrap();
        assert_eq!(raw.len(), 8 * 8 * NUM_CHANNELS);
        let err = raw_window(&s, (42.02, -3.9), day(11), 8).unwrap_err();
        assert!(matches!(err, WamError::FrameViolation { .. }));
        assert!(raw_window(&s, (41.0, -3.9), day(11), 8).is_err());
    }

    #[test]
    fn constant_fields_fuse_to_zero() {
        let s = constant_store(|v, _| v.channel() as f64 * 0.5);
        let mean: Vec<f64> = (0..NUM_CHANNELS)
            .map(|c| if c < 3 { c as f64 * 0.5 } else { 0.0 })
            .collect();
        let z = ZScore {
            mean,
            std: vec![1.0; NUM_CHANNELS],
        };
        let f = fuse_sample(&s, (42.1, -3.9), day(11), &z, 8).unwrap();
        assert_eq!(f.tensor.shape(), &[8, 8, NUM_CHANNELS]);
        assert!(f.tensor.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn missing_greenness_imputed_by_mean() {
        let r = region();
        let t = day(1).and_hms_opt(0, 0, 0).unwrap();
        let mut vals = vec![0.5; r.rows() * r.cols()];
        vals[3] = f64::NAN;
        vals[4] = 0.3;
        let g = GeoGrid::new(VariableId::Gi, "1", t, r.lat.clone(), r.lon.clone(), vals).unwrap();
        let filled = impute_mean(&g);
        let n = (r.rows() * r.cols() - 1) as f64;
        assert!((filled.values[3] - (0.5 * (n - 1.0) + 0.3) / n).abs() < 1e-12);
    }

    #[test]
    fn off_region_grid_rejected() {
        let mut s = GridStore::new(region()).unwrap();
        let t = day(1).and_hms_opt(12, 0, 0).unwrap();
        let g = GeoGrid::new(VariableId::U10, "m/s", t, vec![42.0], vec![-4.0], vec![1.0]).unwrap();
        assert!(s.insert(g).is_err());
    }
}
