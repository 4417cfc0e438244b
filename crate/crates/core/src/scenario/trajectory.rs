use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::{ecef_to_geodetic, enu_to_ecef, geodetic_to_ecef, EcefCoord, EnuCoord, GeodeticCoord};

/// Timed waypoint for piecewise-linear trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time: f64,
    pub position: GeodeticCoord,
}

/// Truth motion over the local tangent plane of its start point.
///
/// Headings are degrees clockwise from north, turn rates degrees per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Static {
        start: GeodeticCoord,
        duration: f64,
    },
    Line {
        start: GeodeticCoord,
        duration: f64,
        speed: f64,
        heading: f64,
    },
    Arc {
        start: GeodeticCoord,
        duration: f64,
        speed: f64,
        heading: f64,
        turn_rate: f64,
    },
    Accelerate {
        start: GeodeticCoord,
        duration: f64,
        #[serde(default)]
        speed: f64,
        heading: f64,
        acceleration: f64,
    },
    Waypoints {
        duration: f64,
        waypoints: Vec<Waypoint>,
    },
}

/// Truth kinematics at one instant. ENU quantities are in the frame of
/// [`TrajectorySpec::origin`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub position: GeodeticCoord,
    pub ecef: EcefCoord,
    pub enu: EnuCoord,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

fn heading_unit(heading_deg: f64) -> Vector3<f64> {
    let (s, c) = heading_deg.to_radians().sin_cos();
    Vector3::new(s, c, 0.0)
}

impl TrajectorySpec {
    pub fn duration(&self) -> f64 {
        match *self {
            TrajectorySpec::Static { duration, .. }
            | TrajectorySpec::Line { duration, .. }
            | TrajectorySpec::Arc { duration, .. }
            | TrajectorySpec::Accelerate { duration, .. }
            | TrajectorySpec::Waypoints { duration, .. } => duration,
        }
    }

    /// Tangent-plane origin of the trajectory.
    pub fn origin(&self) -> GeodeticCoord {
        match self {
            TrajectorySpec::Static { start, .. }
            | TrajectorySpec::Line { start, .. }
            | TrajectorySpec::Arc { start, .. }
            | TrajectorySpec::Accelerate { start, .. } => *start,
            TrajectorySpec::Waypoints { waypoints, .. } => waypoints[0].position,
        }
    }

    /// Upper bound on speed over the whole trajectory (m/s).
    pub fn max_speed(&self) -> f64 {
        match self {
            TrajectorySpec::Static { .. } => 0.0,
            TrajectorySpec::Line { speed, .. } | TrajectorySpec::Arc { speed, .. } => *speed,
            TrajectorySpec::Accelerate {
                speed,
                acceleration,
                duration,
                ..
            } => speed.max(speed + acceleration * duration),
            TrajectorySpec::Waypoints { waypoints, .. } => {
                let origin = self.origin();
                let enu: Vec<_> = waypoints
                    .iter()
                    .map(|w| ecef_to_enu_vec(&w.position, &origin))
                    .collect();
                waypoints
                    .windows(2)
                    .zip(enu.windows(2))
                    .map(|(w, p)| (p[1] - p[0]).norm() / (w[1].time - w[0].time))
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let duration = self.duration();
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid("trajectory.duration", "must be positive"));
        }
        match self {
            TrajectorySpec::Static { .. } => {}
            TrajectorySpec::Line { speed, heading, .. } => check_speed_heading(*speed, *heading)?,
            TrajectorySpec::Arc {
                speed,
                heading,
                turn_rate,
                ..
            } => {
                check_speed_heading(*speed, *heading)?;
                if !turn_rate.is_finite() {
                    return Err(Error::invalid("trajectory.turn_rate", "must be finite"));
                }
            }
            TrajectorySpec::Accelerate {
                speed,
                heading,
                acceleration,
                duration,
                ..
            } => {
                check_speed_heading(*speed, *heading)?;
                if !acceleration.is_finite() || speed + acceleration * duration < 0.0 {
                    return Err(Error::invalid(
                        "trajectory.acceleration",
                        "speed must stay non-negative over the duration",
                    ));
                }
            }
            TrajectorySpec::Waypoints { waypoints, duration } => {
                if waypoints.len() < 2 {
                    return Err(Error::invalid("trajectory.waypoints", "need at least two"));
                }
                if waypoints[0].time != 0.0 {
                    return Err(Error::invalid("trajectory.waypoints", "first waypoint must be at t = 0"));
                }
                if waypoints.windows(2).any(|w| !(w[1].time > w[0].time)) {
                    return Err(Error::invalid("trajectory.waypoints", "times must be strictly increasing"));
                }
                if waypoints[waypoints.len() - 1].time < *duration {
                    return Err(Error::invalid("trajectory.duration", "exceeds the last waypoint time"));
                }
            }
        }
        Ok(())
    }
}

fn check_speed_heading(speed: f64, heading: f64) -> Result<()> {
    if !(speed >= 0.0 && speed.is_finite()) {
        return Err(Error::invalid("trajectory.speed", "must be non-negative"));
    }
    if !heading.is_finite() {
        return Err(Error::invalid("trajectory.heading", "must be finite"));
    }
    Ok(())
}

fn ecef_to_enu_vec(p: &GeodeticCoord, origin: &GeodeticCoord) -> Vector3<f64> {
    crate::geodesy::ecef_to_enu(&geodetic_to_ecef(p), origin).to_vector()
}

/// Closed-form truth position, velocity and acceleration at time `t`.
pub fn truth_at(spec: &TrajectorySpec, t: f64) -> Result<TruthSample> {
    let duration = spec.duration();
    if !(0.0..=duration).contains(&t) {
        return Err(Error::OutOfRange { t, duration });
    }
    let zero = Vector3::zeros();
    let (enu, velocity, acceleration) = match *spec {
        TrajectorySpec::Static { .. } => (zero, zero, zero),
        TrajectorySpec::Line { speed, heading, .. } => {
            let u = heading_unit(heading);
            (u * speed * t, u * speed, zero)
        }
        TrajectorySpec::Arc {
            speed,
            heading,
            turn_rate,
            ..
        } => {
            let h0 = heading.to_radians();
            let w = turn_rate.to_radians();
            let h = h0 + w * t;
            let u = heading_unit(h.to_degrees());
            let pos = if w.abs() < 1e-12 {
                heading_unit(heading) * speed * t
            } else {
                let r = speed / w;
                Vector3::new(r * (h0.cos() - h.cos()), r * (h.sin() - h0.sin()), 0.0)
            };
            // centripetal: velocity rotated a quarter turn toward the turn
            let acc = Vector3::new(h.cos(), -h.sin(), 0.0) * speed * w;
            (pos, u * speed, acc)
        }
        TrajectorySpec::Accelerate {
            speed,
            heading,
            acceleration,
            ..
        } => {
            let u = heading_unit(heading);
            (
                u * (speed * t + 0.5 * acceleration * t * t),
                u * (speed + acceleration * t),
                u * acceleration,
            )
        }
        TrajectorySpec::Waypoints { ref waypoints, .. } => {
            let origin = spec.origin();
            let k = waypoints
                .windows(2)
                .position(|w| t <= w[1].time)
                .unwrap_or(waypoints.len() - 2);
            let (a, b) = (waypoints[k], waypoints[k + 1]);
            let (pa, pb) = (ecef_to_enu_vec(&a.position, &origin), ecef_to_enu_vec(&b.position, &origin));
            let span = b.time - a.time;
            let f = (t - a.time) / span;
            (pa + (pb - pa) * f, (pb - pa) / span, zero)
        }
    };
    let origin = spec.origin();
    let enu = EnuCoord::from_vector(&enu);
    let ecef = enu_to_ecef(&enu, &origin);
    Ok(TruthSample {
        t,
        position: ecef_to_geodetic(&ecef)?,
        ecef,
        enu,
        velocity,
        acceleration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> GeodeticCoord {
        GeodeticCoord::from_degrees(15.4, 73.8, 20.0).unwrap()
    }

    #[test]
    fn static_stays_put() {
        let spec = TrajectorySpec::Static {
            start: start(),
            duration: 60.0,
        };
        for t in [0.0, 17.0, 60.0] {
            let s = truth_at(&spec, t).unwrap();
            assert!(s.ecef.distance(&geodetic_to_ecef(&start())) < 1e-9);
            assert_eq!(s.velocity, Vector3::zeros());
        }
        assert!(matches!(truth_at(&spec, 61.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn line_east() {
        let spec = TrajectorySpec::Line {
            start: start(),
            duration: 100.0,
            speed: 5.0,
            heading: 90.0,
        };
        let s = truth_at(&spec, 100.0).unwrap();
        assert!((s.enu.east - 500.0).abs() < 1e-9 && s.enu.north.abs() < 1e-9);
    }

    #[test]
    fn accelerate_from_rest() {
        let spec = TrajectorySpec::Accelerate {
            start: start(),
            duration: 10.0,
            speed: 0.0,
            heading: 0.0,
            acceleration: 1.0,
        };
        let s = truth_at(&spec, 10.0).unwrap();
        assert!((s.enu.north - 50.0).abs() < 1e-9);
        assert!((s.velocity.norm() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn arc_keeps_speed_and_closes_circle() {
        let spec = TrajectorySpec::Arc {
            start: start(),
            duration: 360.0,
            speed: 10.0,
            heading: 0.0,
            turn_rate: 1.0,
        };
        let end = truth_at(&spec, 360.0).unwrap();
        assert!(end.enu.to_vector().norm() < 1e-6);
        let mid = truth_at(&spec, 90.0).unwrap();
        assert!((mid.velocity.norm() - 10.0).abs() < 1e-12);
        // quarter turn of a clockwise circle of radius v/ω starting north
        let r = 10.0 / 1f64.to_radians();
        assert!((mid.enu.east - r).abs() < 1e-6 && (mid.enu.north - r).abs() < 1e-6);
        // finite-difference check of the reported acceleration
        let (a, b) = (truth_at(&spec, 90.0 - 1e-3).unwrap(), truth_at(&spec, 90.0 + 1e-3).unwrap());
        let fd = (b.velocity - a.velocity) / 2e-3;
        assert!((fd - mid.acceleration).norm() < 1e-6);
    }

    #[test]
    fn waypoints_interpolate() {
        let a = start();
        let b = crate::geodesy::ecef_to_geodetic(&enu_to_ecef(&EnuCoord::new(100.0, 0.0, 0.0), &a)).unwrap();
        let spec = TrajectorySpec::Waypoints {
            duration: 10.0,
            waypoints: vec![Waypoint { time: 0.0, position: a }, Waypoint { time: 10.0, position: b }],
        };
        let s = truth_at(&spec, 5.0).unwrap();
        assert!((s.enu.east - 50.0).abs() < 1e-6);
        assert!((s.velocity.x - 10.0).abs() < 1e-6);
        assert!((spec.max_speed() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        let bad = TrajectorySpec::Line {
            start: start(),
            duration: 0.0,
            speed: 1.0,
            heading: 0.0,
        };
        assert!(bad.validate().is_err());
        let neg = TrajectorySpec::Accelerate {
            start: start(),
            duration: 10.0,
            speed: 5.0,
            heading: 0.0,
            acceleration: -1.0,
        };
        assert!(neg.validate().is_err());
        let unordered = TrajectorySpec::Waypoints {
            duration: 5.0,
            waypoints: vec![
                Waypoint { time: 0.0, position: start() },
                Waypoint { time: 0.0, position: start() },
            ],
        };
        assert!(unordered.validate().is_err());
    }
}
