//! WGS84 coordinate frames: geodetic, Earth-centred Earth-fixed (ECEF) and
//! local East-North-Up (ENU), plus topocentric look angles.
//!
//! Geodetic angles are held in radians and exposed/serialized in degrees.

use std::ops::{Add, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// WGS84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// WGS84 semi-minor axis (m).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);
/// First eccentricity squared.
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

const GEODETIC_MAX_ITERATIONS: usize = 20;
const POLE_TOLERANCE: f64 = 1e-12;

/// Position on the WGS84 ellipsoid.
///
/// The degree values a coordinate was built from are kept alongside the
/// radians so that serialization echoes them exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticCoord {
    lat: f64,
    lon: f64,
    lat_deg: f64,
    lon_deg: f64,
    alt: f64,
}

impl GeodeticCoord {
    /// Builds a coordinate from degrees. Longitude is wrapped into (-180, 180].
    pub fn from_degrees(lat: f64, lon: f64, alt: f64) -> Result<Self> {
        let g = Self::from_radians(lat.to_radians(), lon.to_radians(), alt)?;
        Ok(Self {
            lat_deg: lat.clamp(-90.0, 90.0),
            lon_deg: wrap_longitude_deg(lon),
            ..g
        })
    }

    pub fn from_radians(lat: f64, lon: f64, alt: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || !alt.is_finite() {
            return Err(Error::invalid("geodetic coordinate", "non-finite component"));
        }
        // allow a few ulps of slop from degree conversions
        let half_pi = std::f64::consts::FRAC_PI_2;
        if lat.abs() > half_pi * (1.0 + 1e-15) {
            return Err(Error::invalid(
                "latitude",
                format!("{} deg outside [-90, 90]", lat.to_degrees()),
            ));
        }
        let (lat, lon) = (lat.clamp(-half_pi, half_pi), wrap_longitude(lon));
        Ok(Self {
            lat,
            lon,
            lat_deg: lat.to_degrees(),
            lon_deg: lon.to_degrees(),
            alt,
        })
    }

    pub fn lat_rad(&self) -> f64 {
        self.lat
    }

    pub fn lon_rad(&self) -> f64 {
        self.lon
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_deg
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_deg
    }

    /// Height above the ellipsoid in metres.
    pub fn alt(&self) -> f64 {
        self.alt
    }

    pub fn with_alt(self, alt: f64) -> Self {
        Self { alt, ..self }
    }
}

fn wrap_longitude(lon: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut l = lon.rem_euclid(TAU);
    if l > PI {
        l -= TAU;
    }
    if l == -PI {
        l = PI;
    }
    l
}

fn wrap_longitude_deg(lon: f64) -> f64 {
    if lon > -180.0 && lon <= 180.0 {
        return lon;
    }
    let mut l = lon.rem_euclid(360.0);
    if l > 180.0 {
        l -= 360.0;
    }
    if l == -180.0 {
        l = 180.0;
    }
    l
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeodeticDegrees {
    lat: f64,
    lon: f64,
    alt: f64,
}

impl Serialize for GeodeticCoord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GeodeticDegrees {
            lat: self.lat_deg(),
            lon: self.lon_deg(),
            alt: self.alt,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeodeticCoord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let g = GeodeticDegrees::deserialize(d)?;
        GeodeticCoord::from_degrees(g.lat, g.lon, g.alt).map_err(serde::de::Error::custom)
    }
}

/// Earth-centred Earth-fixed position in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefCoord {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn distance(&self, other: &EcefCoord) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

impl Sub for EcefCoord {
    type Output = Vector3<f64>;

    fn sub(self, rhs: Self) -> Vector3<f64> {
        self.to_vector() - rhs.to_vector()
    }
}

impl Add<Vector3<f64>> for EcefCoord {
    type Output = EcefCoord;

    fn add(self, rhs: Vector3<f64>) -> EcefCoord {
        EcefCoord::from_vector(&(self.to_vector() + rhs))
    }
}

/// Local tangent-plane offset in metres. Only meaningful together with the
/// geodetic origin it was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnuCoord {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl EnuCoord {
    pub const fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.east, self.north, self.up)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn horizontal_norm(&self) -> f64 {
        self.east.hypot(self.north)
    }
}

/// Azimuth (clockwise from north, [0, 2π)) and elevation ([-π/2, π/2]) in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookAngles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl LookAngles {
    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }
}

/// Closed-form WGS84 geodetic to ECEF conversion.
pub fn geodetic_to_ecef(g: &GeodeticCoord) -> EcefCoord {
    let (sin_lat, cos_lat) = g.lat.sin_cos();
    let (sin_lon, cos_lon) = g.lon.sin_cos();
    let n = prime_vertical_radius(sin_lat);
    EcefCoord::new(
        (n + g.alt) * cos_lat * cos_lon,
        (n + g.alt) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + g.alt) * sin_lat,
    )
}

fn prime_vertical_radius(sin_lat: f64) -> f64 {
    WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt()
}

/// Iterative ECEF to geodetic inversion.
///
/// Iterates `lat = atan2(z + e²·N·sin(lat), p)` from the Bowring starting
/// value until the latitude step is below 1e-12 rad and the height step
/// below 1e-6 m.
pub fn ecef_to_geodetic(e: &EcefCoord) -> Result<GeodeticCoord> {
    if !(e.norm() > 0.0) {
        return Err(Error::invalid("ecef position", "zero or non-finite norm"));
    }
    let p = e.x.hypot(e.y);
    let mut lat = e.z.atan2(p * (1.0 - WGS84_E2));
    let mut alt = f64::INFINITY;
    for _ in 0..GEODETIC_MAX_ITERATIONS {
        let (sin_lat, cos_lat) = lat.sin_cos();
        let n = prime_vertical_radius(sin_lat);
        let next_alt = p * cos_lat + e.z * sin_lat - WGS84_A * WGS84_A / n;
        let next_lat = (e.z + WGS84_E2 * n * sin_lat).atan2(p);
        let converged = (next_lat - lat).abs() < 1e-12 && (next_alt - alt).abs() < 1e-6;
        lat = next_lat;
        alt = next_alt;
        if converged {
            let lon = if std::f64::consts::FRAC_PI_2 - lat.abs() < POLE_TOLERANCE {
                0.0
            } else {
                e.y.atan2(e.x)
            };
            // height evaluated at the final latitude
            let (sin_lat, cos_lat) = lat.sin_cos();
            let alt = p * cos_lat + e.z * sin_lat - WGS84_A * WGS84_A / prime_vertical_radius(sin_lat);
            return GeodeticCoord::from_radians(lat, lon, alt);
        }
    }
    Err(Error::NonConvergence {
        what: "ecef_to_geodetic",
        iterations: GEODETIC_MAX_ITERATIONS,
    })
}

/// Rotation taking ECEF vectors into the ENU frame at `origin`.
pub fn enu_rotation(origin: &GeodeticCoord) -> Matrix3<f64> {
    let (sin_lat, cos_lat) = origin.lat.sin_cos();
    let (sin_lon, cos_lon) = origin.lon.sin_cos();
    Matrix3::new(
        -sin_lon,
        cos_lon,
        0.0,
        -sin_lat * cos_lon,
        -sin_lat * sin_lon,
        cos_lat,
        cos_lat * cos_lon,
        cos_lat * sin_lon,
        sin_lat,
    )
}

pub fn ecef_to_enu(e: &EcefCoord, origin: &GeodeticCoord) -> EnuCoord {
    let d = *e - geodetic_to_ecef(origin);
    EnuCoord::from_vector(&(enu_rotation(origin) * d))
}

pub fn enu_to_ecef(p: &EnuCoord, origin: &GeodeticCoord) -> EcefCoord {
    geodetic_to_ecef(origin) + enu_rotation(origin).transpose() * p.to_vector()
}

/// Azimuth/elevation of `sat` seen from `observer`.
pub fn look_angles(observer: &GeodeticCoord, sat: &EcefCoord) -> Result<LookAngles> {
    let enu = ecef_to_enu(sat, observer);
    let range = enu.to_vector().norm();
    if range < 1e-3 {
        return Err(Error::DegenerateGeometry("satellite coincides with observer"));
    }
    let azimuth = enu.east.atan2(enu.north).rem_euclid(std::f64::consts::TAU);
    let elevation = enu.up.atan2(enu.horizontal_norm());
    Ok(LookAngles {
        azimuth: if azimuth >= std::f64::consts::TAU { 0.0 } else { azimuth },
        elevation,
    })
}
