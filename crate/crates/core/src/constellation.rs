//! Regional navigation constellation: two-body Keplerian propagation into
//! ECEF, elevation-masked visibility and the rectangular service area.

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{geodetic_to_ecef, look_angles, EcefCoord, GeodeticCoord, LookAngles};

/// Earth gravitational parameter (m³/s²).
pub const EARTH_MU: f64 = 3.986_004_418e14;
/// Earth sidereal rotation rate (rad/s).
pub const EARTH_ROTATION_RATE: f64 = 7.292_115_146_7e-5;

const KEPLER_MAX_ITERATIONS: usize = 50;

/// Semi-major axis of an orbit whose mean motion equals Earth's rotation rate.
pub fn geosynchronous_radius() -> f64 {
    (EARTH_MU / (EARTH_ROTATION_RATE * EARTH_ROTATION_RATE)).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SatId(pub u16);

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.0)
    }
}

/// Classical Keplerian elements. Angles in degrees, `epoch` in simulation seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitalElements {
    pub sat_id: SatId,
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    pub mean_anomaly_epoch: f64,
    #[serde(default)]
    pub epoch: f64,
    /// Satellite clock offset, range-equivalent metres.
    #[serde(default)]
    pub clock_bias: f64,
}

impl OrbitalElements {
    pub fn validate(&self) -> Result<()> {
        if !(self.semi_major_axis > 6.5e6) {
            return Err(Error::invalid(
                "semi_major_axis",
                format!("{} m must exceed 6.5e6", self.semi_major_axis),
            ));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(Error::invalid(
                "eccentricity",
                format!("{} outside [0, 1)", self.eccentricity),
            ));
        }
        let angles = [
            self.inclination,
            self.raan,
            self.arg_perigee,
            self.mean_anomaly_epoch,
            self.epoch,
            self.clock_bias,
        ];
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("orbital elements", "non-finite value"));
        }
        Ok(())
    }

    /// Circular equatorial orbit parked over `longitude_deg` at t = 0.
    pub fn geostationary(sat_id: SatId, longitude_deg: f64) -> Self {
        Self {
            sat_id,
            semi_major_axis: geosynchronous_radius(),
            eccentricity: 0.0,
            inclination: 0.0,
            raan: 0.0,
            arg_perigee: 0.0,
            mean_anomaly_epoch: longitude_deg,
            epoch: 0.0,
            clock_bias: 0.0,
        }
    }

    /// Circular inclined geosynchronous orbit whose ground track crosses the
    /// equator at `crossing_lon_deg`.
    pub fn inclined_geosynchronous(
        sat_id: SatId,
        inclination_deg: f64,
        crossing_lon_deg: f64,
        mean_anomaly_deg: f64,
    ) -> Self {
        // node crossing happens when M0 + n t = 0, at ECEF longitude raan + M0
        Self {
            sat_id,
            semi_major_axis: geosynchronous_radius(),
            eccentricity: 0.0,
            inclination: inclination_deg,
            raan: crossing_lon_deg - mean_anomaly_deg,
            arg_perigee: 0.0,
            mean_anomaly_epoch: mean_anomaly_deg,
            epoch: 0.0,
            clock_bias: 0.0,
        }
    }
}

/// ECEF state of one satellite at an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub sat_id: SatId,
    pub pos: EcefCoord,
    pub vel: Vector3<f64>,
    /// Range-equivalent metres.
    pub clock_bias: f64,
}

/// Solves Kepler's equation `E - e sin E = M` by Newton iteration.
pub fn solve_kepler(mean_anomaly: f64, eccentricity: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eccentricity) || !mean_anomaly.is_finite() {
        return Err(Error::invalid(
            "kepler input",
            format!("M = {mean_anomaly}, e = {eccentricity}"),
        ));
    }
    use std::f64::consts::{PI, TAU};
    // solve on the principal branch and restore the whole turns afterwards
    let turns = ((mean_anomaly + PI) / TAU).floor();
    let m = mean_anomaly - turns * TAU;
    let mut e_anom = if eccentricity < 0.8 { m } else { PI.copysign(m) };
    for _ in 0..KEPLER_MAX_ITERATIONS {
        let f = e_anom - eccentricity * e_anom.sin() - m;
        let step = f / (1.0 - eccentricity * e_anom.cos());
        e_anom -= step;
        if step.abs() < 1e-15 || f == 0.0 {
            let full = e_anom + turns * TAU;
            if (full - eccentricity * full.sin() - mean_anomaly).abs() < 1e-12 {
                return Ok(full);
            }
        }
    }
    Err(Error::NonConvergence {
        what: "solve_kepler",
        iterations: KEPLER_MAX_ITERATIONS,
    })
}

/// Two-body propagation to simulation time `t`, rotated into ECEF with
/// zero Earth rotation angle at t = 0.
pub fn propagate(el: &OrbitalElements, t: f64) -> Result<SatelliteState> {
    if !(t >= 0.0) {
        return Err(Error::invalid("propagation time", format!("{t} < 0")));
    }
    el.validate()?;
    let a = el.semi_major_axis;
    let e = el.eccentricity;
    let n = (EARTH_MU / (a * a * a)).sqrt();
    let mean_anomaly = el.mean_anomaly_epoch.to_radians() + n * (t - el.epoch);
    let ecc_anomaly = solve_kepler(mean_anomaly, e)?;
    let (sin_e, cos_e) = ecc_anomaly.sin_cos();
    let root = (1.0 - e * e).sqrt();

    let r_pf = Vector3::new(a * (cos_e - e), a * root * sin_e, 0.0);
    let edot = n / (1.0 - e * cos_e);
    let v_pf = Vector3::new(-a * sin_e * edot, a * root * cos_e * edot, 0.0);

    let to_inertial = Rotation3::from_axis_angle(&Vector3::z_axis(), el.raan.to_radians())
        * Rotation3::from_axis_angle(&Vector3::x_axis(), el.inclination.to_radians())
        * Rotation3::from_axis_angle(&Vector3::z_axis(), el.arg_perigee.to_radians());
    let r_eci = to_inertial * r_pf;
    let v_eci = to_inertial * v_pf;

    let theta = EARTH_ROTATION_RATE * t;
    let to_ecef: Matrix3<f64> =
        *Rotation3::from_axis_angle(&Vector3::z_axis(), -theta).matrix();
    let r = to_ecef * r_eci;
    let omega = Vector3::new(0.0, 0.0, EARTH_ROTATION_RATE);
    let v = to_ecef * v_eci - omega.cross(&r);

    Ok(SatelliteState {
        sat_id: el.sat_id,
        pos: EcefCoord::from_vector(&r),
        vel: v,
        clock_bias: el.clock_bias,
    })
}

/// Three geostationary and four inclined geosynchronous slots.
pub fn default_navic_constellation() -> Vec<OrbitalElements> {
    vec![
        OrbitalElements::inclined_geosynchronous(SatId(1), 29.0, 55.0, 0.0),
        OrbitalElements::inclined_geosynchronous(SatId(2), 29.0, 55.0, 180.0),
        OrbitalElements::geostationary(SatId(3), 83.0),
        OrbitalElements::inclined_geosynchronous(SatId(4), 29.0, 111.75, 90.0),
        OrbitalElements::inclined_geosynchronous(SatId(5), 29.0, 111.75, 270.0),
        OrbitalElements::geostationary(SatId(6), 32.5),
        OrbitalElements::geostationary(SatId(7), 129.5),
    ]
}

/// A satellite above the elevation mask together with its look angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibleSatellite {
    pub state: SatelliteState,
    pub look: LookAngles,
}

/// Satellites at or above `mask_deg`, sorted by id.
pub fn visible_satellites(
    user: &GeodeticCoord,
    t: f64,
    mask_deg: f64,
    constellation: &[OrbitalElements],
) -> Result<Vec<VisibleSatellite>> {
    if !(0.0..90.0).contains(&mask_deg) {
        return Err(Error::invalid("elevation mask", format!("{mask_deg} outside [0, 90)")));
    }
    let user_ecef = geodetic_to_ecef(user);
    let mut out = Vec::with_capacity(constellation.len());
    for el in constellation {
        let state = propagate(el, t)?;
        if state.pos.distance(&user_ecef) < 1e-3 {
            continue;
        }
        let look = look_angles(user, &state.pos)?;
        if look.elevation_deg() >= mask_deg {
            out.push(VisibleSatellite { state, look });
        }
    }
    out.sort_by_key(|v| v.state.sat_id);
    Ok(out)
}

/// Latitude/longitude box expanded by a margin, all in degrees except the margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceArea {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub margin_km: f64,
}

impl Default for ServiceArea {
    fn default() -> Self {
        Self {
            lat_min: 0.0,
            lat_max: 40.0,
            lon_min: 60.0,
            lon_max: 100.0,
            margin_km: 1500.0,
        }
    }
}

impl ServiceArea {
    pub const KM_PER_DEGREE: f64 = 111.32;

    pub fn validate(&self) -> Result<()> {
        if !(self.lat_min < self.lat_max && self.lon_min < self.lon_max) {
            return Err(Error::invalid("service area", "min must be below max"));
        }
        if !(self.margin_km >= 0.0) {
            return Err(Error::invalid("margin_km", "must be non-negative"));
        }
        Ok(())
    }

    pub fn margin_deg(&self) -> f64 {
        self.margin_km / Self::KM_PER_DEGREE
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.lat_min, self.lon_min),
            (self.lat_min, self.lon_max),
            (self.lat_max, self.lon_min),
            (self.lat_max, self.lon_max),
        ]
    }
}

/// Closed-boundary containment test against the margin-expanded box.
pub fn in_service_area(p: &GeodeticCoord, area: &ServiceArea) -> bool {
    let m = area.margin_deg();
    let (lat, lon) = (p.lat_deg(), p.lon_deg());
    lat >= area.lat_min - m && lat <= area.lat_max + m && lon >= area.lon_min - m && lon <= area.lon_max + m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::ecef_to_geodetic;

    fn bisect_kepler(m: f64, e: f64) -> f64 {
        let f = |x: f64| x - e * x.sin() - m;
        let (mut lo, mut hi) = (0.0, std::f64::consts::TAU);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn kepler_identities() {
        for m in [-2.0, 0.3, 1.7, 3.0] {
            assert_eq!(solve_kepler(m, 0.0).unwrap(), m);
        }
        for e in [0.0, 0.1, 0.5, 0.95] {
            assert!(solve_kepler(0.0, e).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn kepler_matches_bisection() {
        let expected = bisect_kepler(1.0, 0.1);
        assert!((solve_kepler(1.0, 0.1).unwrap() - expected).abs() < 1e-10);
        assert!((expected - 1.088_597_752_397_894).abs() < 1e-10);
    }

    #[test]
    fn kepler_rejects_hyperbolic() {
        assert!(solve_kepler(1.0, 1.0).is_err());
    }

    #[test]
    fn geostationary_holds_longitude() {
        let el = OrbitalElements::geostationary(SatId(3), 83.0);
        for k in 0..=96 {
            let t = k as f64 * 900.0;
            let s = propagate(&el, t).unwrap();
            let g = ecef_to_geodetic(&s.pos).unwrap();
            assert!((g.lon_deg() - 83.0).abs() < 0.01, "t = {t}: lon {}", g.lon_deg());
            assert!(g.lat_deg().abs() < 1e-6);
            // ECEF velocity of a geostationary satellite vanishes
            assert!(s.vel.norm() < 1e-3);
        }
    }

    #[test]
    fn circular_orbit_radius_constant() {
        let mut el = OrbitalElements::geostationary(SatId(9), 10.0);
        el.semi_major_axis = 26_560e3;
        for k in 0..50 {
            let s = propagate(&el, k as f64 * 1234.5).unwrap();
            assert!((s.pos.norm() - el.semi_major_axis).abs() < 1e-3);
        }
    }

    #[test]
    fn inclined_orbit_latitude_excursion() {
        let el = OrbitalElements::inclined_geosynchronous(SatId(1), 29.0, 55.0, 0.0);
        let sidereal_day = std::f64::consts::TAU / EARTH_ROTATION_RATE;
        let mut max_lat: f64 = 0.0;
        let steps = 2000;
        for k in 0..=steps {
            let t = sidereal_day * k as f64 / steps as f64;
            let g = ecef_to_geodetic(&propagate(&el, t).unwrap().pos).unwrap();
            max_lat = max_lat.max(g.lat_deg().abs());
            assert!(g.lat_deg().abs() <= 29.1);
        }
        assert!((max_lat - 29.0).abs() < 0.1, "max |lat| {max_lat}");
        // node crossing at t = 0 sits on the configured longitude
        let g0 = ecef_to_geodetic(&propagate(&el, 0.0).unwrap().pos).unwrap();
        assert!((g0.lon_deg() - 55.0).abs() < 1e-9 && g0.lat_deg().abs() < 1e-9);
    }

    #[test]
    fn propagate_rejects_negative_time() {
        assert!(propagate(&default_navic_constellation()[0], -1.0).is_err());
    }

    #[test]
    fn default_constellation_layout() {
        let c = default_navic_constellation();
        assert_eq!(c.len(), 7);
        let geo: Vec<_> = c.iter().filter(|e| e.inclination == 0.0).collect();
        assert_eq!(geo.len(), 3);
        assert!(geo.iter().all(|e| e.eccentricity == 0.0));
        for el in &c {
            let r = propagate(el, 3600.0).unwrap().pos.norm();
            assert!((2e7..=5e7).contains(&r));
        }
    }

    #[test]
    fn visibility_from_goa() {
        let goa = GeodeticCoord::from_degrees(15.4, 73.8, 0.0).unwrap();
        let c = default_navic_constellation();
        let all = visible_satellites(&goa, 0.0, 0.0, &c).unwrap();
        assert_eq!(all.len(), 7);
        assert!(all.windows(2).all(|w| w[0].state.sat_id < w[1].state.sat_id));
        let high = visible_satellites(&goa, 0.0, 89.9, &c).unwrap();
        assert!(high.len() <= 1);
        assert!(visible_satellites(&goa, 0.0, 90.0, &c).is_err());
    }

    #[test]
    fn service_area_membership() {
        let area = ServiceArea::default();
        let goa = GeodeticCoord::from_degrees(15.4, 73.8, 0.0).unwrap();
        let london = GeodeticCoord::from_degrees(51.5, 0.0, 0.0).unwrap();
        assert!(in_service_area(&goa, &area));
        assert!(!in_service_area(&london, &area));
        let edge = GeodeticCoord::from_degrees(area.lat_max + area.margin_deg(), 80.0, 0.0).unwrap();
        assert!(in_service_area(&edge, &area));
    }
}
