//! Projections between supported CRSs and WGS84 longitude/latitude.
//!
//! Supported EPSG codes: 4326 (identity), 3857 (spherical web Mercator) and
//! the WGS84 UTM zones 32601–32660 / 32701–32760. Transverse Mercator uses
//! Krüger series to third order in the third flattening, accurate to well
//! under a millimetre inside a zone.

use crate::{Error, Result};

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Crs {
    Geographic,
    WebMercator,
    Utm { zone: u32, north: bool },
}

fn parse(epsg: i32) -> Result<Crs> {
    match epsg {
        4326 => Ok(Crs::Geographic),
        3857 => Ok(Crs::WebMercator),
        32601..=32660 => Ok(Crs::Utm { zone: (epsg - 32600) as u32, north: true }),
        32701..=32760 => Ok(Crs::Utm { zone: (epsg - 32700) as u32, north: false }),
        _ => Err(Error::Unsupported(format!("EPSG:{epsg}"))),
    }
}

pub fn is_supported(epsg: i32) -> bool {
    parse(epsg).is_ok()
}

/// UTM EPSG code covering a WGS84 position.
pub fn utm_epsg_for(lon: f64, lat: f64) -> i32 {
    let zone = (((lon + 180.0) / 6.0).floor() as i32).clamp(0, 59) + 1;
    if lat >= 0.0 {
        32600 + zone
    } else {
        32700 + zone
    }
}

struct Series {
    n: f64,
    big_a: f64,
    alpha: [f64; 3],
    beta: [f64; 3],
}

fn series() -> Series {
    let n = F / (2.0 - F);
    let (n2, n3) = (n * n, n * n * n);
    Series {
        n,
        big_a: A / (1.0 + n) * (1.0 + n2 / 4.0 + n2 * n2 / 64.0),
        alpha: [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0,
            61.0 * n3 / 240.0,
        ],
        beta: [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0,
            n2 / 48.0 + n3 / 15.0,
            17.0 * n3 / 480.0,
        ],
    }
}

fn central_meridian(zone: u32) -> f64 {
    (zone as f64 * 6.0 - 183.0).to_radians()
}

fn utm_forward(zone: u32, north: bool, lon: f64, lat: f64) -> (f64, f64) {
    let s = series();
    let phi = lat.to_radians();
    let lambda = lon.to_radians() - central_meridian(zone);
    let k = 2.0 * s.n.sqrt() / (1.0 + s.n);
    let t = (phi.sin().atanh() - k * (k * phi.sin()).atanh()).sinh();
    let xi_p = t.atan2(lambda.cos());
    let eta_p = (lambda.sin() / (1.0 + t * t).sqrt()).atanh();
    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let m = 2.0 * (j + 1) as f64;
        xi += a * (m * xi_p).sin() * (m * eta_p).cosh();
        eta += a * (m * xi_p).cos() * (m * eta_p).sinh();
    }
    let e = FALSE_EASTING + K0 * s.big_a * eta;
    let nn = K0 * s.big_a * xi + if north { 0.0 } else { FALSE_NORTHING_SOUTH };
    (e, nn)
}

fn utm_inverse(zone: u32, north: bool, e: f64, nn: f64) -> (f64, f64) {
    let s = series();
    let xi = (nn - if north { 0.0 } else { FALSE_NORTHING_SOUTH }) / (K0 * s.big_a);
    let eta = (e - FALSE_EASTING) / (K0 * s.big_a);
    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let m = 2.0 * (j + 1) as f64;
        xi_p -= b * (m * xi).sin() * (m * eta).cosh();
        eta_p -= b * (m * xi).cos() * (m * eta).sinh();
    }
    let chi = (xi_p.sin() / eta_p.cosh()).asin();
    // Conformal to geodetic latitude by Newton iteration on the exact relation.
    let e2 = F * (2.0 - F);
    let ecc = e2.sqrt();
    let tau_p = chi.tan();
    let mut tau = tau_p;
    for _ in 0..8 {
        let sigma = (ecc * (ecc * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
        let tau_i = tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt();
        let d = (tau_p - tau_i) / (1.0 + tau_i * tau_i).sqrt() * (1.0 + (1.0 - e2) * tau * tau)
            / ((1.0 - e2) * (1.0 + tau * tau).sqrt());
        tau += d;
        if d.abs() < 1e-15 {
            break;
        }
    }
    let phi = tau.atan();
    let lambda = eta_p.sinh().atan2(xi_p.cos()) + central_meridian(zone);
    (lambda.to_degrees(), phi.to_degrees())
}

/// Projected `(x, y)` to `(lon, lat)` degrees.
pub fn to_lonlat(epsg: i32, x: f64, y: f64) -> Result<(f64, f64)> {
    Ok(match parse(epsg)? {
        Crs::Geographic => (x, y),
        Crs::WebMercator => ((x / A).to_degrees(), (2.0 * (y / A).exp().atan() - std::f64::consts::FRAC_PI_2).to_degrees()),
        Crs::Utm { zone, north } => utm_inverse(zone, north, x, y),
    })
}

/// `(lon, lat)` degrees to projected `(x, y)`.
pub fn from_lonlat(epsg: i32, lon: f64, lat: f64) -> Result<(f64, f64)> {
    Ok(match parse(epsg)? {
        Crs::Geographic => (lon, lat),
        Crs::WebMercator => (
            A * lon.to_radians(),
            A * (std::f64::consts::FRAC_PI_4 + lat.to_radians() / 2.0).tan().ln(),
        ),
        Crs::Utm { zone, north } => utm_forward(zone, north, lon, lat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utm_reference_point() {
        // Central meridian of zone 43 on the equator maps to the false easting.
        let (e, n) = from_lonlat(32643, 75.0, 0.0).unwrap();
        assert!((e - 500_000.0).abs() < 1e-6 && n.abs() < 1e-6);
        // One degree of latitude on the central meridian: k0 × meridian arc.
        let (_, n1) = from_lonlat(32643, 75.0, 1.0).unwrap();
        assert!((n1 - 0.9996 * 110_574.389).abs() < 0.05, "{n1}");
    }

    #[test]
    fn utm_round_trip_is_sub_millimetre() {
        for &(lon, lat) in &[(77.59, 12.97), (73.2, 28.1), (79.9, 8.2), (74.5, 22.0)] {
            let epsg = utm_epsg_for(lon, lat);
            let (x, y) = from_lonlat(epsg, lon, lat).unwrap();
            let (lo, la) = to_lonlat(epsg, x, y).unwrap();
            assert!((lo - lon).abs() < 1e-9 && (la - lat).abs() < 1e-9, "{lo} {la}");
            let (x2, y2) = from_lonlat(epsg, lo, la).unwrap();
            assert!((x2 - x).abs() < 1e-4 && (y2 - y).abs() < 1e-4);
        }
    }

    #[test]
    fn southern_and_mercator_round_trip() {
        let (x, y) = from_lonlat(32736, 33.1, -12.4).unwrap();
        let (lo, la) = to_lonlat(32736, x, y).unwrap();
        assert!((lo - 33.1).abs() < 1e-9 && (la + 12.4).abs() < 1e-9);
        let (x, y) = from_lonlat(3857, 77.0, 13.0).unwrap();
        let (lo, la) = to_lonlat(3857, x, y).unwrap();
        assert!((lo - 77.0).abs() < 1e-9 && (la - 13.0).abs() < 1e-9);
    }

    #[test]
    fn unsupported_codes_are_rejected() {
        assert!(to_lonlat(27700, 0.0, 0.0).is_err());
    }
}
