use super::grid::locate;
use super::utm::decimal_to_utm;
use super::{GeoGrid, UtmGrid};
use crate::{Result, WamError};

fn bilinear(values: &[f64], cols: usize, (i, ti): (usize, f64), (j, tj): (usize, f64)) -> f64 {
    let at = |r: usize, c: usize| values[r * cols + c];
    let i1 = if ti > 0.0 { i + 1 } else { i };
    let j1 = if tj > 0.0 { j + 1 } else { j };
    let top = at(i, j) * (1.0 - tj) + if j1 != j { at(i, j1) * tj } else { 0.0 };
    if i1 == i {
        return top;
    }
    let bottom = at(i1, j) * (1.0 - tj) + if j1 != j { at(i1, j1) * tj } else { 0.0 };
    top * (1.0 - ti) + bottom * ti
}

fn locate_all(axis: &[f64], targets: &[f64], name: &str) -> Result<Vec<(usize, f64)>> {
    targets
        .iter()
        .map(|&x| {
            locate(axis, x).ok_or_else(|| {
                WamError::OutOfCoverage(format!("{name} {x} outside [{}, {}]", axis[0], axis[axis.len() - 1]))
            })
        })
        .collect()
}

/// Bilinear interpolation of `src` onto new latitude/longitude axes inside
/// its coverage. A NaN corner with non-zero weight yields NaN.
pub fn resample_bilinear(src: &GeoGrid, lat: &[f64], lon: &[f64]) -> Result<GeoGrid> {
    super::grid::check_axis("target latitude", lat, Some(90.0))?;
    super::grid::check_axis("target longitude", lon, Some(180.0))?;
    let rows = locate_all(&src.lat, lat, "latitude")?;
    let cols = locate_all(&src.lon, lon, "longitude")?;
    let mut values = Vec::with_capacity(lat.len() * lon.len());
    for &r in &rows {
        for &c in &cols {
            values.push(bilinear(&src.values, src.cols(), r, c));
        }
    }
    Ok(GeoGrid {
        variable: src.variable,
        units: src.units.clone(),
        timestamp: src.timestamp,
        lat: lat.to_vec(),
        lon: lon.to_vec(),
        values,
    })
}

/// Warps a UTM-referenced grid onto decimal axes: each target cell centre
/// is projected into the source zone and sampled bilinearly there.
pub fn reproject_utm(src: &UtmGrid, lat: &[f64], lon: &[f64]) -> Result<GeoGrid> {
    src.validate()?;
    super::grid::check_axis("target latitude", lat, Some(90.0))?;
    super::grid::check_axis("target longitude", lon, Some(180.0))?;
    let mut values = Vec::with_capacity(lat.len() * lon.len());
    for &la in lat {
        for &lo in lon {
            let (e, n) = decimal_to_utm(la, lo, src.zone, src.hemisphere)?;
            let r = locate(&src.northing, n)
                .ok_or_else(|| WamError::OutOfCoverage(format!("({la}, {lo}) maps to northing {n:.1}")))?;
            let c = locate(&src.easting, e)
                .ok_or_else(|| WamError::OutOfCoverage(format!("({la}, {lo}) maps to easting {e:.1}")))?;
            values.push(bilinear(&src.values, src.easting.len(), r, c));
        }
    }
    Ok(GeoGrid {
        variable: src.variable,
        units: src.units.clone(),
        timestamp: src.timestamp,
        lat: lat.to_vec(),
        lon: lon.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;
    use proptest::prelude::*;

    use super::*;
    use crate::geodata::VariableId;

    fn grid(lat: Vec<f64>, lon: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> GeoGrid {
        let values = lat
            .iter()
            .flat_map(|&a| lon.iter().map(move |&o| (a, o)))
            .map(|(a, o)| f(a, o))
            .collect();
        let t = NaiveDate::from_ymd_opt(2021, 6, 1)
            .unwrap()
            .and_hms_opt(12, 0, 0)
            .unwrap();
        GeoGrid::new(VariableId::U10, "m/s", t, lat, lon, values).unwrap()
    }

    fn axis(start: f64, step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| start + step * i as f64).collect()
    }

    #[test]
    fn identity_axes_reproduce_values() {
        let g = grid(axis(43.0, -0.25, 6), axis(-6.0, 0.25, 7), |a, o| {
            (a * 3.1).sin() + o * o
        });
        let r = resample_bilinear(&g, &g.lat, &g.lon).unwrap();
        assert_eq!(r.values, g.values);
    }

    #[test]
    fn constant_field_stays_constant() {
        let g = grid(axis(43.0, -0.25, 5), axis(-6.0, 0.25, 5), |_, _| 2.5);
        let r = resample_bilinear(&g, &axis(42.9, -0.013, 50), &axis(-5.9, 0.017, 40)).unwrap();
        assert!(r.values.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn refuses_to_extrapolate() {
        let g = grid(axis(43.0, -0.25, 5), axis(-6.0, 0.25, 5), |_, _| 1.0);
        let err = resample_bilinear(&g, &[43.1], &[-5.0]).unwrap_err();
        assert!(matches!(err, WamError::OutOfCoverage(_)));
    }

    proptest! {
        #[test]
        fn linear_fields_are_exact(a in -5.0f64..5.0, b in -5.0f64..5.0, tl in 0.0f64..1.0, to in 0.0f64..1.0) {
            let g = grid(axis(43.0, -0.3, 6), axis(-6.0, 0.4, 6), |la, lo| a * la + b * lo);
            let la = 43.0 - 1.5 * tl;
            let lo = -6.0 + 2.0 * to;
            let r = resample_bilinear(&g, &[la], &[lo]).unwrap();
            prop_assert!((r.values[0] - (a * la + b * lo)).abs() <= 1e-6);
        }

        #[test]
        fn never_leaves_source_range(seed in 0u64..1000) {
            let g = grid(axis(43.0, -0.3, 5), axis(-6.0, 0.4, 5), |la, lo| ((la * 17.0 + lo * 5.0 + seed as f64) * 1.3).sin());
            let (lo_v, hi_v) = g.values.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
            let r = resample_bilinear(&g, &axis(42.95, -0.04, 25), &axis(-5.95, 0.05, 30)).unwrap();
            prop_assert!(r.values.iter().all(|&v| v >= lo_v - 1e-12 && v <= hi_v + 1e-12));
        }
    }
}
