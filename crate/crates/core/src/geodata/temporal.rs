use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::{GeoGrid, DAILY_HOURS};
use crate::{Result, WamError};

/// The 12:00 reading when present, otherwise the 18:00 one.
pub fn select_daily_reading<'a>(
    readings: &'a BTreeMap<u32, GeoGrid>,
    variable: &str,
    date: NaiveDate,
) -> Result<&'a GeoGrid> {
    DAILY_HOURS
        .iter()
        .find_map(|h| readings.get(h))
        .ok_or_else(|| WamError::MissingData {
            variable: variable.to_string(),
            date: date.to_string(),
        })
}

/// Difference between the two latest grids dated at or before `date`
/// (latest minus previous). Dates must be strictly increasing.
pub fn trend_diff(series: &[(NaiveDate, GeoGrid)], date: NaiveDate) -> Result<GeoGrid> {
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(WamError::InvalidGrid(
            "trend series dates must be strictly increasing".into(),
        ));
    }
    let upto = series.partition_point(|(d, _)| *d <= date);
    if upto < 2 {
        let variable = series
            .first()
            .map(|(_, g)| g.variable.name().to_string())
            .unwrap_or_else(|| "trend".into());
        return Err(WamError::MissingData {
            variable: format!("{variable} (need two measurements at or before the date)"),
            date: date.to_string(),
        });
    }
    let (_, prev) = &series[upto - 2];
    let (_, last) = &series[upto - 1];
    if prev.lat != last.lat || prev.lon != last.lon {
        return Err(WamError::InvalidGrid("trend grids on different axes".into()));
    }
    let values = last.values.iter().zip(&prev.values).map(|(a, b)| a - b).collect();
    Ok(last.with_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::VariableId;

    fn grid(v: f64, hour: u32) -> GeoGrid {
        let t = NaiveDate::from_ymd_opt(2021, 6, 1)
            .unwrap()
            .and_hms_opt(hour, 0, 0)
            .unwrap();
        GeoGrid::new(
            VariableId::U10,
            "m/s",
            t,
            vec![42.0, 41.0],
            vec![-5.0, -4.0],
            vec![v; 4],
        )
        .unwrap()
    }

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 6, day).unwrap()
    }

    #[test]
    fn prefers_noon_reading() {
        let mut r = BTreeMap::new();
        r.insert(18, grid(2.0, 18));
        r.insert(12, grid(1.0, 12));
        assert_eq!(select_daily_reading(&r, "u10", d(1)).unwrap().values[0], 1.0);
        r.remove(&12);
        assert_eq!(select_daily_reading(&r, "u10", d(1)).unwrap().values[0], 2.0);
        r.clear();
        let err = select_daily_reading(&r, "u10", d(1)).unwrap_err().to_string();
        assert!(err.contains("u10") && err.contains("2021-06-01"), "{err}");
    }

    #[test]
    fn difference_of_latest_two() {
        let s = vec![(d(1), grid(1.0, 0)), (d(11), grid(5.0, 0)), (d(21), grid(7.0, 0))];
        assert!(trend_diff(&s, d(25)).unwrap().values.iter().all(|&v| v == 2.0));
        assert!(trend_diff(&s, d(15)).unwrap().values.iter().all(|&v| v == 4.0));
        assert!(trend_diff(&s, d(5)).is_err());
        let same = vec![(d(1), grid(3.0, 0)), (d(11), grid(3.0, 0))];
        assert!(trend_diff(&same, d(11)).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_in_time_gives_slope_times_gap() {
        let slope = 0.35;
        let s: Vec<_> = [1u32, 11, 21]
            .iter()
            .map(|&day| (d(day), grid(slope * day as f64 + 4.0, 0)))
            .collect();
        let g = trend_diff(&s, d(30)).unwrap();
        assert!(g.values.iter().all(|&v| (v - slope * 10.0).abs() < 1e-12));
    }

    #[test]
    fn unordered_dates_rejected() {
        let s = vec![(d(11), grid(1.0, 0)), (d(1), grid(5.0, 0))];
        assert!(trend_diff(&s, d(25)).is_err());
    }
}
