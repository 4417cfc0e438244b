//! Timed position tracks and EKF smoothing of imported tracks.

use ofgnss_core::estimator::{ekf_predict, ekf_update_position, InnovationRecord, NavState, SpoofDetector};
use ofgnss_core::geodesy::{ecef_to_geodetic, geodetic_to_ecef};
use ofgnss_core::{EstimatorConfig, GeodeticCoord};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackSource {
    Truth,
    Estimate,
    Imported,
}

/// A position with its time in seconds after the simulation epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub position: GeodeticCoord,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub name: String,
    pub source: TrackSource,
    points: Vec<TrackPoint>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("timestamps must strictly increase (point {index})")]
    NonMonotonicTime { index: usize },
    #[error("track needs at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error(transparent)]
    Estimator(#[from] ofgnss_core::Error),
}

impl Track {
    pub fn new(name: impl Into<String>, source: TrackSource, points: Vec<TrackPoint>) -> Result<Self, TrackError> {
        if let Some(k) = points.windows(2).position(|w| !(w[1].time > w[0].time)) {
            return Err(TrackError::NonMonotonicTime { index: k + 1 });
        }
        Ok(Self {
            name: name.into(),
            source,
            points,
        })
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Filtered track plus the per-point innovation records (first point
/// excluded, it seeds the filter).
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTrack {
    pub track: Track,
    pub diagnostics: Vec<InnovationRecord>,
}

/// Runs the EKF over the track with every point as a 3-D position
/// observation of standard deviation `sigma` metres.
pub fn smooth_track(track: &Track, cfg: &EstimatorConfig, sigma: f64) -> Result<SmoothedTrack, TrackError> {
    let pts = track.points();
    if pts.len() < 2 {
        return Err(TrackError::TooShort {
            needed: 2,
            got: pts.len(),
        });
    }
    cfg.validate()?;
    let p0 = geodetic_to_ecef(&pts[0].position);
    let p1 = geodetic_to_ecef(&pts[1].position);
    let v0 = (p1 - p0) / (pts[1].time - pts[0].time);
    let mut state = NavState::from_fix(cfg.process.model, p0, 0.0, pts[0].time, &cfg.init).with_velocity(v0);
    let mut detector = SpoofDetector::new(cfg.detector)?;

    let mut out = vec![pts[0]];
    let mut diagnostics = Vec::with_capacity(pts.len() - 1);
    for (k, p) in pts.iter().enumerate().skip(1) {
        let step = || -> ofgnss_core::Result<(NavState, InnovationRecord)> {
            let prior = ekf_predict(&state, p.time - state.epoch, &cfg.process)?;
            let (post, record) = ekf_update_position(&prior, &geodetic_to_ecef(&p.position), sigma)?;
            Ok((post, InnovationRecord { epoch: p.time, ..record }))
        };
        let (post, record) = step().map_err(|e| e.at_epoch(k as f64))?;
        diagnostics.push(detector.push(record));
        out.push(TrackPoint {
            position: ecef_to_geodetic(&post.pos())?,
            time: p.time,
        });
        state = post;
    }
    Ok(SmoothedTrack {
        track: Track::new(format!("{} (smoothed)", track.name), TrackSource::Estimate, out)?,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofgnss_core::geodesy::{enu_to_ecef, EnuCoord};

    fn line_track(n: usize, outlier: Option<usize>) -> Track {
        let origin = GeodeticCoord::from_degrees(28.6, 77.2, 200.0).unwrap();
        let points = (0..n)
            .map(|k| {
                let t = k as f64;
                let up = if Some(k) == outlier { 100.0 } else { 0.0 };
                let e = enu_to_ecef(&EnuCoord::new(3.0 * t, 4.0 * t, up), &origin);
                TrackPoint {
                    position: ecef_to_geodetic(&e).unwrap(),
                    time: t,
                }
            })
            .collect();
        Track::new("line", TrackSource::Imported, points).unwrap()
    }

    #[test]
    fn noiseless_line_is_kept() {
        let track = line_track(120, None);
        let out = smooth_track(&track, &EstimatorConfig::default(), 3.0).unwrap();
        for (a, b) in track.points().iter().zip(out.track.points()) {
            let d = geodetic_to_ecef(&a.position).distance(&geodetic_to_ecef(&b.position));
            assert!(d < 0.5, "{d}");
        }
        assert!(out.diagnostics.iter().all(|r| !r.flagged));
    }

    #[test]
    fn outlier_is_flagged() {
        let out = smooth_track(&line_track(60, Some(40)), &EstimatorConfig::default(), 3.0).unwrap();
        let first = out.diagnostics.iter().find(|r| r.flagged).map(|r| r.epoch);
        assert_eq!(first, Some(40.0));
    }

    #[test]
    fn single_point_is_rejected() {
        let t = line_track(1, None);
        assert_eq!(
            smooth_track(&t, &EstimatorConfig::default(), 3.0),
            Err(TrackError::TooShort { needed: 2, got: 1 })
        );
    }

    #[test]
    fn times_must_increase() {
        let p = line_track(3, None).points().to_vec();
        let swapped = vec![p[0], p[2], p[1]];
        assert_eq!(
            Track::new("x", TrackSource::Imported, swapped),
            Err(TrackError::NonMonotonicTime { index: 2 })
        );
    }
}
