//! Transverse Mercator on the WGS-84 ellipsoid using the sixth-order Krüger
//! series, accurate to well below a millimetre inside a UTM zone.

use super::Hemisphere;
use crate::{Result, WamError};

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

struct Series {
    rectifying_radius: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
    e: f64,
}

fn series() -> Series {
    let n = F / (2.0 - F);
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    let rectifying_radius = A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    let alpha = [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 + 7891.0 * n6 / 37800.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 - 1983433.0 * n6 / 1935360.0,
        61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
        49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
        34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
        212378941.0 * n6 / 319334400.0,
    ];
    let beta = [
        n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0 + 96199.0 * n6 / 604800.0,
        n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0,
        17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
        4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
        4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
        20648693.0 * n6 / 638668800.0,
    ];
    Series {
        rectifying_radius,
        alpha,
        beta,
        e: (F * (2.0 - F)).sqrt(),
    }
}

fn check_zone(zone: u8) -> Result<()> {
    if (1..=60).contains(&zone) {
        Ok(())
    } else {
        Err(WamError::InvalidZone(zone))
    }
}

/// Longitude of the central meridian of a zone, in degrees.
pub fn central_meridian(zone: u8) -> Result<f64> {
    check_zone(zone)?;
    Ok(zone as f64 * 6.0 - 183.0)
}

/// Standard zone containing a longitude (no Norway/Svalbard exceptions).
pub fn zone_for(lon: f64) -> u8 {
    (((lon + 180.0) / 6.0).floor() as i64).clamp(0, 59) as u8 + 1
}

/// Decimal degrees to (easting, northing) in metres.
pub fn decimal_to_utm(lat: f64, lon: f64, zone: u8, hemisphere: Hemisphere) -> Result<(f64, f64)> {
    let lon0 = central_meridian(zone)?;
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(WamError::InvalidCoordinate(format!("({lat}, {lon})")));
    }
    let s = series();
    let phi = lat.to_radians();
    let lam = (lon - lon0).to_radians();
    let two_sqrt_n = 2.0 * (F / (2.0 - F)).sqrt() / (1.0 + F / (2.0 - F));
    let t = (phi.sin().atanh() - two_sqrt_n * (two_sqrt_n * phi.sin()).atanh()).sinh();
    let xi_p = t.atan2(lam.cos());
    let eta_p = (lam.sin() / (1.0 + t * t).sqrt()).atanh();
    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    let easting = FALSE_EASTING + K0 * s.rectifying_radius * eta;
    let mut northing = K0 * s.rectifying_radius * xi;
    if hemisphere == Hemisphere::South {
        northing += FALSE_NORTHING_SOUTH;
    }
    Ok((easting, northing))
}

/// (easting, northing) in metres to decimal degrees (latitude, longitude).
pub fn utm_to_decimal(easting: f64, northing: f64, zone: u8, hemisphere: Hemisphere) -> Result<(f64, f64)> {
    let lon0 = central_meridian(zone)?;
    if !(easting > 0.0 && easting < 1_000_000.0) || !(0.0..=10_000_000.0).contains(&northing) {
        return Err(WamError::InvalidCoordinate(format!(
            "easting {easting} / northing {northing} outside UTM ranges"
        )));
    }
    let s = series();
    let y = match hemisphere {
        Hemisphere::North => northing,
        Hemisphere::South => northing - FALSE_NORTHING_SOUTH,
    };
    let xi = y / (K0 * s.rectifying_radius);
    let eta = (easting - FALSE_EASTING) / (K0 * s.rectifying_radius);
    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let tau_p = xi_p.sin() / (eta_p.sinh().powi(2) + xi_p.cos().powi(2)).sqrt();
    let lam = eta_p.sinh().atan2(xi_p.cos());

    // Newton iteration for tan(phi) from the conformal tan(phi').
    let e = s.e;
    let e2m = 1.0 - e * e;
    let mut tau = tau_p;
    for _ in 0..8 {
        let sigma = (e * (e * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
        let tau_i = tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt();
        let dtau =
            (tau_p - tau_i) / (1.0 + tau_i * tau_i).sqrt() * (1.0 + e2m * tau * tau) / (e2m * (1.0 + tau * tau).sqrt());
        tau += dtau;
        if dtau.abs() < 1e-14 {
            break;
        }
    }
    Ok((tau.atan().to_degrees(), lon0 + lam.to_degrees()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_meridian_on_equator() {
        let (lat, lon) = utm_to_decimal(500_000.0, 0.0, 30, Hemisphere::North).unwrap();
        assert!(lat.abs() < 1e-12);
        assert!((lon + 3.0).abs() < 1e-12);
    }

    #[test]
    fn zone_out_of_range() {
        assert!(matches!(
            utm_to_decimal(500_000.0, 0.0, 0, Hemisphere::North),
            Err(WamError::InvalidZone(0))
        ));
        assert!(matches!(
            decimal_to_utm(40.0, -3.0, 61, Hemisphere::North),
            Err(WamError::InvalidZone(61))
        ));
    }

    #[test]
    fn zone_lookup() {
        assert_eq!(zone_for(-3.7), 30);
        assert_eq!(zone_for(-6.1), 29);
        assert_eq!(zone_for(179.9), 60);
    }

    #[test]
    fn round_trip_within_a_millimetre() {
        for &(lat, lon) in &[(41.65, -4.72), (42.9, -1.1), (-33.9, 151.2), (0.5, 2.9)] {
            let zone = zone_for(lon);
            let hemi = if lat >= 0.0 {
                Hemisphere::North
            } else {
                Hemisphere::South
            };
            let (e, n) = decimal_to_utm(lat, lon, zone, hemi).unwrap();
            let (lat2, lon2) = utm_to_decimal(e, n, zone, hemi).unwrap();
            let (e2, n2) = decimal_to_utm(lat2, lon2, zone, hemi).unwrap();
            assert!((e - e2).abs() < 1e-3 && (n - n2).abs() < 1e-3);
            assert!((lat - lat2).abs() < 1e-9 && (lon - lon2).abs() < 1e-9);
        }
    }
}
