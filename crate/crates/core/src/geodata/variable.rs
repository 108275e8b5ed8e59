use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Result, WamError};

/// The nine input channels, in tensor order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableId {
    /// 10 m U wind component.
    U10,
    /// 10 m V wind component.
    V10,
    /// Greenness index, latest measurement.
    Gi,
    /// 2 m dewpoint temperature.
    Dewpoint,
    /// Surface net solar radiation.
    NetSolar,
    /// Surface net thermal radiation.
    NetThermal,
    /// Surface thermal radiation downwards.
    ThermalDown,
    /// Surface solar radiation downwards.
    SolarDown,
    /// Total column ozone.
    Ozone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// Read on the day of the sample, 12:00 preferred over 18:00.
    Daily,
    /// Difference between the two latest greenness-index dates (the index
    /// itself is taken as is).
    Trend,
}

/// Fixed channel order of every fused tensor.
pub const CHANNEL_ORDER: [VariableId; 9] = [
    VariableId::U10,
    VariableId::V10,
    VariableId::Gi,
    VariableId::Dewpoint,
    VariableId::NetSolar,
    VariableId::NetThermal,
    VariableId::ThermalDown,
    VariableId::SolarDown,
    VariableId::Ozone,
];

pub const NUM_CHANNELS: usize = CHANNEL_ORDER.len();

/// Preferred reading hours for daily variables, in priority order.
pub const DAILY_HOURS: [u32; 2] = [12, 18];

impl VariableId {
    pub fn name(self) -> &'static str {
        match self {
            VariableId::U10 => "u10",
            VariableId::V10 => "v10",
            VariableId::Gi => "gi",
            VariableId::Dewpoint => "d2m",
            VariableId::NetSolar => "ssr",
            VariableId::NetThermal => "str",
            VariableId::ThermalDown => "strd",
            VariableId::SolarDown => "ssrd",
            VariableId::Ozone => "tco3",
        }
    }

    pub fn group(self) -> Group {
        match self {
            VariableId::U10 | VariableId::V10 => Group::Daily,
            _ => Group::Trend,
        }
    }

    pub fn channel(self) -> usize {
        CHANNEL_ORDER.iter().position(|&v| v == self).expect("listed")
    }

    pub fn spec(self) -> VariableSpec {
        VariableSpec {
            variable: self,
            group: self.group(),
            preferred_hours: match self.group() {
                Group::Daily => DAILY_HOURS.to_vec(),
                Group::Trend => Vec::new(),
            },
        }
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariableId {
    type Err = WamError;

    fn from_str(s: &str) -> Result<Self> {
        CHANNEL_ORDER
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| WamError::Unknown {
                kind: "variable",
                name: s.to_string(),
                known: channel_names().join(", "),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub variable: VariableId,
    pub group: Group,
    pub preferred_hours: Vec<u32>,
}

pub fn channel_names() -> Vec<&'static str> {
    CHANNEL_ORDER.iter().map(|v| v.name()).collect()
}

/// Stable text fingerprint of the channel order, stored alongside
/// normalization statistics and checkpoints.
pub fn channel_fingerprint() -> String {
    channel_names().join("|")
}

/// The six assessment labels, in vector order.
pub const LABEL_NAMES: [&str; 6] = [
    "burnt_area_m",
    "control_time_min",
    "extinction_time_min",
    "human_units",
    "heavy_units",
    "aerial_units",
];

pub const NUM_LABELS: usize = LABEL_NAMES.len();

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_daily_and_seven_trend_channels() {
        let daily = CHANNEL_ORDER.iter().filter(|v| v.group() == Group::Daily).count();
        assert_eq!(daily, 2);
        assert_eq!(NUM_CHANNELS - daily, 7);
        assert_eq!(VariableId::U10.spec().preferred_hours, vec![12, 18]);
    }

    #[test]
    fn names_round_trip() {
        for v in CHANNEL_ORDER {
            assert_eq!(v.name().parse::<VariableId>().unwrap(), v);
            assert_eq!(CHANNEL_ORDER[v.channel()], v);
        }
        assert!("evaporation".parse::<VariableId>().is_err());
    }
}
