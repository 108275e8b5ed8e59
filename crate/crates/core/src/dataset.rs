//! Collections of fused samples, their binary container and the labelled
//! fire record table.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wam_grad::Tensor;

use crate::geodata::{
    channel_fingerprint, normalize_window, raw_window, FusedSample, GridStore, MinMax, NormalizationStats, ZScore,
    CHANNEL_ORDER, LABEL_NAMES, NUM_CHANNELS, NUM_LABELS,
};
use crate::seeds::{self, stream};
use crate::{Result, WamError};

pub const SAMPLES_MAGIC: &[u8; 8] = b"WAMSAMP1";

/// A labelled wildfire: where, when and the six assessment values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FireRecord {
    pub lat: f64,
    pub lon: f64,
    pub date: NaiveDate,
    pub burnt_area_m: f64,
    pub control_time_min: f64,
    pub extinction_time_min: f64,
    pub human_units: f64,
    pub heavy_units: f64,
    pub aerial_units: f64,
}

impl FireRecord {
    pub fn new(lat: f64, lon: f64, date: NaiveDate, y: [f64; NUM_LABELS]) -> Self {
        FireRecord {
            lat,
            lon,
            date,
            burnt_area_m: y[0],
            control_time_min: y[1],
            extinction_time_min: y[2],
            human_units: y[3],
            heavy_units: y[4],
            aerial_units: y[5],
        }
    }

    pub fn label(&self) -> [f64; NUM_LABELS] {
        [
            self.burnt_area_m,
            self.control_time_min,
            self.extinction_time_min,
            self.human_units,
            self.heavy_units,
            self.aerial_units,
        ]
    }
}

pub fn write_fires(path: &Path, fires: &[FireRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| WamError::parse(path.display().to_string(), e.to_string()))?;
    for f in fires {
        w.serialize(f)
            .map_err(|e| WamError::parse(path.display().to_string(), e.to_string()))?;
    }
    w.flush().map_err(|e| WamError::io(path, e))
}

pub fn read_fires(path: &Path) -> Result<Vec<FireRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| WamError::parse(path.display().to_string(), e.to_string()))?;
    let fires: Vec<FireRecord> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| WamError::parse(path.display().to_string(), e.to_string()))?;
    if let Some(f) = fires.iter().find(|f| f.label().iter().any(|&v| !(v >= 0.0))) {
        return Err(WamError::parse(
            path.display().to_string(),
            format!(
                "negative or missing label for the fire at ({}, {}) on {}",
                f.lat, f.lon, f.date
            ),
        ));
    }
    Ok(fires)
}

#[derive(Serialize, Deserialize)]
struct SamplesHeader {
    window: usize,
    channels: usize,
    channel_order: String,
    centers: Vec<(f64, f64)>,
    dates: Vec<NaiveDate>,
    labels: Vec<Option<[f64; NUM_LABELS]>>,
}

/// Fused samples sharing one window size.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub window: usize,
    pub samples: Vec<FusedSample>,
}

impl Dataset {
    pub fn new(window: usize, samples: Vec<FusedSample>) -> Self {
        Dataset { window, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn inputs(&self) -> Vec<&Tensor> {
        self.samples.iter().map(|s| &s.tensor).collect()
    }

    /// Labels in natural units; errors when any sample is unlabelled.
    pub fn labels(&self) -> Result<Vec<[f64; NUM_LABELS]>> {
        self.samples
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| WamError::Config("dataset contains unlabelled samples".into()))
            })
            .collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset::new(self.window, idx.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Seeded random split; the first part holds `round(fraction · n)`
    /// samples.
    pub fn split(&self, fraction: f64, seed: u64, stream_id: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeds::rng(seed, &[stream::SPLIT, stream_id]));
        let cut = (fraction * self.len() as f64).round() as usize;
        let (a, b) = idx.split_at(cut.min(self.len()));
        let (mut a, mut b) = (a.to_vec(), b.to_vec());
        a.sort_unstable();
        b.sort_unstable();
        (self.subset(&a), self.subset(&b))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = SamplesHeader {
            window: self.window,
            channels: NUM_CHANNELS,
            channel_order: channel_fingerprint(),
            centers: self.samples.iter().map(|s| s.center).collect(),
            dates: self.samples.iter().map(|s| s.date).collect(),
            labels: self.samples.iter().map(|s| s.label).collect(),
        };
        let header = serde_json::to_vec(&header).expect("plain data serializes");
        let mut out = Vec::new();
        out.extend_from_slice(SAMPLES_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for s in &self.samples {
            out.extend(s.tensor.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| WamError::parse("sample file", m.to_string());
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != SAMPLES_MAGIC {
            return Err(bad("not a sample file"));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated header"))?;
        let len = u64::from_le_bytes(len) as usize;
        if r.len() < len {
            return Err(bad("truncated header"));
        }
        let h: SamplesHeader = serde_json::from_slice(&r[..len]).map_err(|e| bad(&e.to_string()))?;
        r = &r[len..];
        if h.channel_order != channel_fingerprint() || h.channels != NUM_CHANNELS {
            return Err(WamError::Fingerprint {
                expected: channel_fingerprint(),
                found: h.channel_order,
            });
        }
        let n = h.window * h.window * h.channels * 4;
        if h.dates.len() != h.centers.len() || h.labels.len() != h.centers.len() || r.len() != n * h.centers.len() {
            return Err(bad("sample data length disagrees with the header"));
        }
        let samples = r
            .chunks_exact(n.max(1))
            .zip(h.centers.iter().zip(h.dates.iter().zip(&h.labels)))
            .map(|(chunk, (&center, (&date, &label)))| {
                Ok(FusedSample {
                    tensor: Tensor::from_le_bytes(&[h.window, h.window, h.channels], chunk)?,
                    center,
                    date,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset::new(h.window, samples))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| WamError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| WamError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Ingestion settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub window: usize,
    /// Unlabelled samples drawn at random cells and dates.
    pub unlabelled: usize,
    /// Share of labelled samples used for training.
    pub train_fraction: f64,
    pub seed: u64,
}

/// Output of [`ingest`].
#[derive(Clone, Debug)]
pub struct Ingested {
    pub unlabelled: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub stats: NormalizationStats,
}

/// Random (date, cell) pairs whose full window fits the region.
pub fn random_centers(
    store: &GridStore,
    window: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<((f64, f64), NaiveDate)>> {
    let dates = store.sample_dates();
    let (rows, cols) = (store.region.rows(), store.region.cols());
    let half = window / 2;
    if dates.is_empty() || rows < window || cols < window {
        return Err(WamError::Config("no date or cell admits a full window".into()));
    }
    let mut rng = seeds::rng(seed, &[stream::SAMPLING]);
    Ok((0..count)
        .map(|_| {
            let d = dates[rand::Rng::gen_range(&mut rng, 0..dates.len())];
            let i = rand::Rng::gen_range(&mut rng, half..=rows - window + half);
            let j = rand::Rng::gen_range(&mut rng, half..=cols - window + half);
            ((store.region.lat[i], store.region.lon[j]), d)
        })
        .collect())
}

/// Fuses unlabelled and labelled samples, fits input statistics over all of
/// them and label statistics over the training split.
pub fn ingest(store: &GridStore, fires: &[FireRecord], config: &IngestConfig) -> Result<Ingested> {
    let w = config.window;
    let unl_points = random_centers(store, w, config.unlabelled, config.seed)?;
    let unl_raw = unl_points
        .par_iter()
        .map(|&(c, d)| raw_window(store, c, d, w))
        .collect::<Result<Vec<_>>>()?;
    let fire_raw = fires
        .par_iter()
        .map(|f| raw_window(store, (f.lat, f.lon), f.date, w))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = CHANNEL_ORDER.iter().map(|v| v.name()).collect();
    let zscore = ZScore::fit(
        unl_raw.iter().chain(&fire_raw).flat_map(|r| r.chunks(NUM_CHANNELS)),
        NUM_CHANNELS,
        &names,
    )?;
    let fuse = |raw: &Vec<f64>, center, date, label| -> Result<FusedSample> {
        Ok(FusedSample {
            tensor: normalize_window(raw, w, &zscore)?,
            center,
            date,
            label,
        })
    };
    let unlabelled = unl_raw
        .par_iter()
        .zip(&unl_points)
        .map(|(r, &(c, d))| fuse(r, c, d, None))
        .collect::<Result<Vec<_>>>()?;
    let labelled = fire_raw
        .par_iter()
        .zip(fires)
        .map(|(r, f)| fuse(r, (f.lat, f.lon), f.date, Some(f.label())))
        .collect::<Result<Vec<_>>>()?;
    let labelled = Dataset::new(w, labelled);
    let (train, test) = labelled.split(config.train_fraction, config.seed, 0);
    let train_labels = train.labels()?;
    let mut stats = NormalizationStats::new(zscore);
    stats.labels = Some(MinMax::fit(train_labels.iter().map(|l| &l[..]), &LABEL_NAMES)?);
    Ok(Ingested {
        unlabelled: Dataset::new(w, unlabelled),
        train,
        test,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_file_round_trip() {
        let d = NaiveDate::from_ymd_opt(2021, 7, 1).unwrap();
        let samples = (0..3)
            .map(|i| FusedSample {
                tensor: Tensor::from_fn(&[4, 4, NUM_CHANNELS], |k| (k as f32 * 0.37 + i as f32).sin()),
                center: (42.0 + i as f64 * 0.02, -4.0),
                date: d,
                label: (i > 0).then_some([1.0 / 3.0, 2.0, 3.0, 4.0, 5.0, 1e-9]),
            })
            .collect();
        let ds = Dataset::new(4, samples);
        let back = Dataset::from_bytes(&ds.to_bytes()).unwrap();
        assert_eq!(back, ds);
        assert!(Dataset::from_bytes(&ds.to_bytes()[..50]).is_err());
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let d = NaiveDate::from_ymd_opt(2021, 7, 1).unwrap();
        let samples = (0..10)
            .map(|i| FusedSample {
                tensor: Tensor::zeros(&[2, 2, NUM_CHANNELS]),
                center: (i as f64, 0.0),
                date: d,
                label: None,
            })
            .collect();
        let ds = Dataset::new(2, samples);
        let (a, b) = ds.split(0.7, 3, 0);
        assert_eq!((a.len(), b.len()), (7, 3));
        assert_eq!(ds.split(0.7, 3, 0).0, a);
        let mut all: Vec<f64> = a.samples.iter().chain(&b.samples).map(|s| s.center.0).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn fires_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fires.csv");
        let d = NaiveDate::from_ymd_opt(2021, 7, 1).unwrap();
        let fires = vec![FireRecord::new(
            42.1,
            -3.7,
            d,
            [812.5, 91.0, 300.1, 6.2, 2.0, 0.1 + 0.2],
        )];
        write_fires(&p, &fires).unwrap();
        assert_eq!(read_fires(&p).unwrap(), fires);
        std::fs::write(&p, "lat,lon,date,burnt_area_m,control_time_min,extinction_time_min,human_units,heavy_units,aerial_units\n1,2,2021-07-01,-1,0,0,0,0,0\n").unwrap();
        assert!(read_fires(&p).is_err());
    }
}
