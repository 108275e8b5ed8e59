use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{oracle_labels, random_field};
use crate::dataset::{write_fires, FireRecord};
use crate::geodata::{
    decimal_to_utm, greenness_index, raw_window, AxisSpec, GeoGrid, GridEntry, GridFile, GridStore, Hemisphere,
    Manifest, RegionSpec, SyntheticInfo, UtmGrid, VariableId,
};
use crate::seeds::{self, stream};
use crate::{Result, WamError};

/// Synthetic world settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    pub seed: u64,
    pub region: RegionSpec,
    /// Spacing of the atmospheric grids in decimal degrees.
    pub coarse_step: f64,
    /// Spacing of the greenness UTM grid in metres.
    pub utm_spacing: f64,
    pub utm_zone: u8,
    /// First and last day with samples.
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub fires: usize,
    pub window: usize,
    /// Log-normal label noise level.
    pub label_noise: f64,
    /// Share of days whose 12:00 wind reading is missing.
    pub missing_noon: f64,
    /// Greenness pixels with all-zero reflectance per measurement.
    pub dark_pixels: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig::desk(7)
    }
}

impl WorldConfig {
    /// 96×96 cells of 0.02° over northern Spain, June–July 2021.
    pub fn desk(seed: u64) -> Self {
        WorldConfig {
            seed,
            region: RegionSpec {
                lat: AxisSpec {
                    start: 41.5,
                    step: 0.02,
                    count: 96,
                },
                lon: AxisSpec {
                    start: -5.0,
                    step: 0.02,
                    count: 96,
                },
            },
            coarse_step: 0.1,
            utm_spacing: 1500.0,
            utm_zone: 30,
            first_day: NaiveDate::from_ymd_opt(2021, 6, 11).expect("valid date"),
            last_day: NaiveDate::from_ymd_opt(2021, 7, 31).expect("valid date"),
            fires: 500,
            window: 32,
            label_noise: 0.1,
            missing_noon: 0.1,
            dark_pixels: 3,
        }
    }
}

/// Generator constants of one variable: value = offset + scale · field.
struct VarModel {
    variable: VariableId,
    units: &'static str,
    offset: f64,
    scale: f64,
    /// Correlation length in coarse cells.
    correlation: f64,
}

const ATMOSPHERE: [VarModel; 8] = [
    VarModel {
        variable: VariableId::U10,
        units: "m s-1",
        offset: 4.0,
        scale: 2.5,
        correlation: 4.0,
    },
    VarModel {
        variable: VariableId::V10,
        units: "m s-1",
        offset: 1.0,
        scale: 2.5,
        correlation: 4.0,
    },
    VarModel {
        variable: VariableId::Dewpoint,
        units: "K",
        offset: 285.0,
        scale: 3.0,
        correlation: 6.0,
    },
    VarModel {
        variable: VariableId::NetSolar,
        units: "J m-2",
        offset: 2.0e7,
        scale: 2.0e6,
        correlation: 8.0,
    },
    VarModel {
        variable: VariableId::NetThermal,
        units: "J m-2",
        offset: -6.0e6,
        scale: 8.0e5,
        correlation: 8.0,
    },
    VarModel {
        variable: VariableId::ThermalDown,
        units: "J m-2",
        offset: 2.8e7,
        scale: 1.2e6,
        correlation: 10.0,
    },
    VarModel {
        variable: VariableId::SolarDown,
        units: "J m-2",
        offset: 2.4e7,
        scale: 2.0e6,
        correlation: 8.0,
    },
    VarModel {
        variable: VariableId::Ozone,
        units: "kg m-2",
        offset: 6.5e-3,
        scale: 2.0e-4,
        correlation: 14.0,
    },
];

/// Greenness correlation length in UTM cells.
const GI_CORRELATION: f64 = 8.0;

/// Greenness measurement days: the 1st, 11th and 21st of each month.
pub fn gi_dates(first: NaiveDate, last: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = NaiveDate::from_ymd_opt(first.year(), first.month(), 1).expect("valid date") - Duration::days(40);
    while d <= last {
        if matches!(d.day(), 1 | 11 | 21) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    // the two measurements preceding the first sample day, and all later ones
    let keep_from = out.iter().rposition(|&g| g <= first).unwrap_or(0).saturating_sub(1);
    out.split_off(keep_from)
}

fn axis_covering(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let start = ((lo / step).floor() - 1.0) * step;
    let n = ((hi - start) / step).ceil() as usize + 2;
    (0..n).map(|i| start + step * i as f64).collect()
}

fn day_index(first: NaiveDate, d: NaiveDate) -> u64 {
    (d - first).num_days().rem_euclid(1 << 20) as u64 + 100
}

/// Every grid of a synthetic world plus the manifest that lists them.
pub struct World {
    pub config: WorldConfig,
    pub grids: Vec<(String, GridFile)>,
}

impl World {
    pub fn generate(config: WorldConfig) -> Result<Self> {
        if config.first_day > config.last_day {
            return Err(WamError::Config("first_day is after last_day".into()));
        }
        let seed = config.seed;
        let region = config.region.axes();
        let (lat_lo, lat_hi) = (
            region.lat[0].min(region.lat[region.rows() - 1]),
            region.lat[0].max(region.lat[region.rows() - 1]),
        );
        let (lon_lo, lon_hi) = (
            region.lon[0].min(region.lon[region.cols() - 1]),
            region.lon[0].max(region.lon[region.cols() - 1]),
        );
        let clat = axis_covering(lat_lo, lat_hi, config.coarse_step);
        let clon = axis_covering(lon_lo, lon_hi, config.coarse_step);
        let cells = clat.len() * clon.len();
        let mut grids = Vec::new();
        let field = |var: usize, key: u64, corr: f64| -> Result<Vec<f64>> {
            random_field(
                clat.len(),
                clon.len(),
                corr,
                seeds::derive(seed, &[stream::SYNTH, var as u64, key]),
            )
        };
        let at = |d: NaiveDate, h: u32| -> NaiveDateTime { d.and_hms_opt(h, 0, 0).expect("valid hour") };
        let name = |v: VariableId, t: NaiveDateTime| format!("grids/{}_{}.grid", v.name(), t.format("%Y%m%dT%H"));

        // daily wind readings
        let mut day_rng = seeds::rng(seed, &[stream::SYNTH, 999]);
        let mut d = config.first_day;
        while d <= config.last_day {
            let skip_noon = day_rng.gen::<f64>() < config.missing_noon;
            for (vi, m) in ATMOSPHERE.iter().enumerate().take(2) {
                let base = field(vi, 0, m.correlation)?;
                for hour in [12u32, 18] {
                    if hour == 12 && skip_noon {
                        continue;
                    }
                    let anom = field(vi, day_index(config.first_day, d) * 24 + hour as u64, m.correlation)?;
                    let values = (0..cells)
                        .map(|i| m.offset + m.scale * (0.6 * base[i] + 0.8 * anom[i]))
                        .collect();
                    let t = at(d, hour);
                    let g = GeoGrid::new(m.variable, m.units, t, clat.clone(), clon.clone(), values)?;
                    grids.push((name(m.variable, t), GridFile::Geo(g)));
                }
            }
            d += Duration::days(1);
        }

        // trend variables at greenness dates
        let gdates = gi_dates(config.first_day, config.last_day);
        for (vi, m) in ATMOSPHERE.iter().enumerate().skip(2) {
            let base = field(vi, 0, m.correlation)?;
            for &gd in &gdates {
                let anom = field(vi, day_index(config.first_day, gd) * 24, m.correlation)?;
                let values = (0..cells)
                    .map(|i| m.offset + m.scale * (base[i] + 0.8 * anom[i]))
                    .collect();
                let t = at(gd, 0);
                let g = GeoGrid::new(m.variable, m.units, t, clat.clone(), clon.clone(), values)?;
                grids.push((name(m.variable, t), GridFile::Geo(g)));
            }
        }

        // greenness from synthetic reflectance on a UTM lattice
        let zone = config.utm_zone;
        let mut e_lo = f64::MAX;
        let mut e_hi = f64::MIN;
        let mut n_lo = f64::MAX;
        let mut n_hi = f64::MIN;
        for &la in &[lat_lo, (lat_lo + lat_hi) / 2.0, lat_hi] {
            for &lo in &[lon_lo, (lon_lo + lon_hi) / 2.0, lon_hi] {
                let (e, n) = decimal_to_utm(la, lo, zone, Hemisphere::North)?;
                e_lo = e_lo.min(e);
                e_hi = e_hi.max(e);
                n_lo = n_lo.min(n);
                n_hi = n_hi.max(n);
            }
        }
        let s = config.utm_spacing;
        let easting = axis_covering(e_lo - 2.0 * s, e_hi + 2.0 * s, s);
        let northing = axis_covering(n_lo - 2.0 * s, n_hi + 2.0 * s, s);
        let ucells = easting.len() * northing.len();
        let ufield = |band: u64, key: u64| {
            random_field(
                northing.len(),
                easting.len(),
                GI_CORRELATION,
                seeds::derive(seed, &[stream::SYNTH, 50 + band, key]),
            )
        };
        let bases = [ufield(0, 0)?, ufield(1, 0)?, ufield(2, 0)?];
        for &gd in &gdates {
            let key = day_index(config.first_day, gd);
            let anom = ufield(3, key)?;
            let red: Vec<f64> = (0..ucells).map(|i| (0.08 + 0.02 * bases[0][i]).max(1e-3)).collect();
            let mut green: Vec<f64> = (0..ucells)
                .map(|i| (0.12 + 0.03 * (bases[1][i] + 0.8 * anom[i])).max(1e-3))
                .collect();
            let blue: Vec<f64> = (0..ucells).map(|i| (0.06 + 0.015 * bases[2][i]).max(1e-3)).collect();
            let (mut red, mut blue) = (red, blue);
            let mut dark = seeds::rng(seed, &[stream::SYNTH, 60, key]);
            for _ in 0..config.dark_pixels {
                let i = dark.gen_range(0..ucells);
                red[i] = 0.0;
                green[i] = 0.0;
                blue[i] = 0.0;
            }
            let g = UtmGrid {
                variable: VariableId::Gi,
                units: "1".into(),
                timestamp: at(gd, 0),
                zone,
                hemisphere: Hemisphere::North,
                northing: northing.clone(),
                easting: easting.clone(),
                values: greenness_index(&red, &green, &blue)?,
            };
            g.validate()?;
            grids.push((name(VariableId::Gi, g.timestamp), GridFile::Utm(g)));
        }
        Ok(World { config, grids })
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            region: self.config.region.clone(),
            synthetic: Some(SyntheticInfo {
                seed: self.config.seed,
                generator: "wam synthetic world".into(),
                note: "SYNTHETIC DATA: generated fields and oracle labels, not observations".into(),
            }),
            grids: self.grids.iter().map(|(p, _)| GridEntry { path: p.into() }).collect(),
        }
    }

    /// Harmonizes every grid onto the region.
    pub fn store(&self) -> Result<GridStore> {
        let mut store = GridStore::new(self.config.region.axes())?;
        for (_, g) in &self.grids {
            match g {
                GridFile::Geo(g) => store.ingest(g)?,
                GridFile::Utm(g) => store.ingest_utm(g)?,
            }
        }
        Ok(store)
    }

    /// Fires at random dates and cells, labelled by the oracle.
    pub fn fires(&self, store: &GridStore) -> Result<Vec<FireRecord>> {
        let cfg = &self.config;
        let points = crate::dataset::random_centers(
            store,
            cfg.window,
            cfg.fires,
            seeds::derive(cfg.seed, &[stream::SYNTH, 70]),
        )?;
        let mut noise = seeds::rng(cfg.seed, &[stream::SYNTH, 71]);
        points
            .into_iter()
            .map(|((lat, lon), date)| {
                let raw = raw_window(store, (lat, lon), date, cfg.window)?;
                Ok(FireRecord::new(
                    lat,
                    lon,
                    date,
                    oracle_labels(&raw, cfg.label_noise, &mut noise),
                ))
            })
            .collect()
    }

    /// Writes grids, `manifest.toml` and `fires.csv` under `dir`.
    pub fn write(&self, dir: &Path, fires: &[FireRecord]) -> Result<()> {
        let gdir = dir.join("grids");
        std::fs::create_dir_all(&gdir).map_err(|e| WamError::io(&gdir, e))?;
        for (p, g) in &self.grids {
            crate::geodata::write_grid(&dir.join(p), g)?;
        }
        self.manifest().write(&dir.join("manifest.toml"))?;
        write_fires(&dir.join("fires.csv"), fires)
    }
}
