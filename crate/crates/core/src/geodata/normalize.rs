use serde::{Deserialize, Serialize};

use super::{channel_fingerprint, channel_names, LABEL_NAMES, NUM_CHANNELS, NUM_LABELS};
use crate::{Result, WamError};

/// Per-channel z-score parameters (population standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    /// Fits one mean/std per column over rows of `channels` values.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, channels: usize, names: &[&str]) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = vec![0.0; channels];
        let mut sq = vec![0.0; channels];
        let mut first: Option<Vec<f64>> = None;
        for row in rows {
            debug_assert_eq!(row.len(), channels);
            // shift by the first row to keep the one-pass variance stable
            let shift = first.get_or_insert_with(|| row.to_vec());
            for c in 0..channels {
                let d = row[c] - shift[c];
                sum[c] += d;
                sq[c] += d * d;
            }
            n += 1;
        }
        if n == 0 {
            return Err(WamError::Config("z-score fit over an empty set".into()));
        }
        let shift = first.expect("n > 0");
        let mut mean = Vec::with_capacity(channels);
        let mut std = Vec::with_capacity(channels);
        for c in 0..channels {
            let m = sum[c] / n as f64;
            let var = (sq[c] / n as f64 - m * m).max(0.0);
            let s = var.sqrt();
            if !(s > 1e-12 * (1.0 + (m + shift[c]).abs())) {
                let name = names.get(c).copied().unwrap_or("?");
                return Err(WamError::ZeroVariance(name.to_string()));
            }
            mean.push(m + shift[c]);
            std.push(s);
        }
        Ok(ZScore { mean, std })
    }

    pub fn apply(&self, channel: usize, v: f64) -> f64 {
        (v - self.mean[channel]) / self.std[channel]
    }

    pub fn invert(&self, channel: usize, z: f64) -> f64 {
        z * self.std[channel] + self.mean[channel]
    }
}

/// Per-label min-max scaling onto [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, names: &[&str]) -> Result<Self> {
        let mut min: Vec<f64> = Vec::new();
        let mut max: Vec<f64> = Vec::new();
        for row in rows {
            if min.is_empty() {
                min = row.to_vec();
                max = row.to_vec();
                continue;
            }
            for (i, &v) in row.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        if min.is_empty() {
            return Err(WamError::Config("min-max fit over an empty set".into()));
        }
        for i in 0..min.len() {
            if !(max[i] > min[i]) {
                let name = names.get(i).copied().unwrap_or("?");
                return Err(WamError::ZeroRange(name.to_string()));
            }
        }
        Ok(MinMax { min, max })
    }

    pub fn apply(&self, i: usize, v: f64) -> f64 {
        (v - self.min[i]) / (self.max[i] - self.min[i])
    }

    pub fn invert(&self, i: usize, s: f64) -> f64 {
        s * (self.max[i] - self.min[i]) + self.min[i]
    }

    pub fn apply_all(&self, v: &[f64]) -> Vec<f64> {
        v.iter().enumerate().map(|(i, &x)| self.apply(i, x)).collect()
    }

    pub fn invert_all(&self, v: &[f64]) -> Vec<f64> {
        v.iter().enumerate().map(|(i, &x)| self.invert(i, x)).collect()
    }
}

/// Input z-score and label min-max statistics, tagged with the channel
/// order they were fitted under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub channel_order: Vec<String>,
    pub channel_fingerprint: String,
    pub inputs: ZScore,
    pub labels: Option<MinMax>,
    pub label_names: Vec<String>,
}

impl NormalizationStats {
    pub fn new(inputs: ZScore) -> Self {
        NormalizationStats {
            channel_order: channel_names().iter().map(|s| s.to_string()).collect(),
            channel_fingerprint: channel_fingerprint(),
            inputs,
            labels: None,
            label_names: LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Rejects statistics fitted under a different channel layout.
    pub fn check_channels(&self) -> Result<()> {
        if self.channel_fingerprint != channel_fingerprint() || self.inputs.mean.len() != NUM_CHANNELS {
            return Err(WamError::Fingerprint {
                expected: channel_fingerprint(),
                found: self.channel_fingerprint.clone(),
            });
        }
        if let Some(l) = &self.labels {
            if l.min.len() != NUM_LABELS {
                return Err(WamError::Config(format!(
                    "{} label ranges, expected {NUM_LABELS}",
                    l.min.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| WamError::parse("normalization stats", e.to_string()))?;
        s.check_channels()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn z_scores_of_one_two_three() {
        let rows: Vec<[f64; 1]> = vec![[1.0], [2.0], [3.0]];
        let z = ZScore::fit(rows.iter().map(|r| &r[..]), 1, &["x"]).unwrap();
        let got: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&v| z.apply(0, v)).collect();
        for (g, w) in got.iter().zip([-1.2247, 0.0, 1.2247]) {
            assert!((g - w).abs() < 1e-4);
        }
    }

    #[test]
    fn zero_variance_names_channel() {
        let rows: Vec<[f64; 2]> = vec![[1.0, 5.0], [2.0, 5.0]];
        let err = ZScore::fit(rows.iter().map(|r| &r[..]), 2, &["u10", "v10"]).unwrap_err();
        assert_eq!(err.to_string(), "zero variance in channel `v10`");
    }

    #[test]
    fn minmax_endpoints() {
        let rows: Vec<[f64; 1]> = vec![[0.0], [50.0], [100.0]];
        let m = MinMax::fit(rows.iter().map(|r| &r[..]), &["a"]).unwrap();
        assert_eq!([0.0, 50.0, 100.0].map(|v| m.apply(0, v)), [0.0, 0.5, 1.0]);
        let flat: Vec<[f64; 1]> = vec![[3.0], [3.0]];
        assert!(
            matches!(MinMax::fit(flat.iter().map(|r| &r[..]), &["heavy_units"]), Err(WamError::ZeroRange(n)) if n == "heavy_units")
        );
    }

    #[test]
    fn stats_json_round_trip() {
        let mut s = NormalizationStats::new(ZScore {
            mean: vec![0.5; 9],
            std: vec![2.0; 9],
        });
        s.labels = Some(MinMax {
            min: vec![0.0; 6],
            max: vec![1.0; 6],
        });
        assert_eq!(NormalizationStats::from_json(&s.to_json()).unwrap(), s);
        let mut bad = s.clone();
        bad.channel_fingerprint = "v10|u10".into();
        assert!(NormalizationStats::from_json(&bad.to_json()).is_err());
    }

    proptest! {
        #[test]
        fn minmax_invert_apply_identity(v in prop::collection::vec(-1e4f64..1e4, 2..40)) {
            let rows: Vec<[f64; 1]> = v.iter().map(|&x| [x]).collect();
            if let Ok(m) = MinMax::fit(rows.iter().map(|r| &r[..]), &["a"]) {
                for &x in &v {
                    prop_assert!((m.invert(0, m.apply(0, x)) - x).abs() <= 1e-6 * (1.0 + x.abs()));
                }
            }
        }
    }
}
