//! Truth trajectories, synthetic camera frames and end-to-end scenario runs.

mod render;
mod run;
mod trajectory;

pub use render::{frame_pair_flow, render_frame, rendered_velocity, FLOW_GRID};
pub use run::{compare_runs, run_scenario, run_scenario_with, EpochRecord, RunMetrics, RunMode, RunOptions, RunOutput};
pub use trajectory::{truth_at, TrajectorySpec, TruthSample, Waypoint};

use serde::{Deserialize, Serialize};

use crate::constellation::{default_navic_constellation, in_service_area, OrbitalElements, ServiceArea};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, ProcessConfig};
use crate::geodesy::GeodeticCoord;
use crate::measurements::{ErrorBudget, SpoofProfile};
use crate::optical_flow::CameraModel;

/// Interval during which the `lowest_count` lowest-elevation satellites
/// carry the budget's multipath bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathBurst {
    pub start: f64,
    pub end: f64,
    pub lowest_count: usize,
}

impl MultipathBurst {
    pub fn contains(&self, t: f64) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

/// Everything needed to reproduce one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub trajectory: TrajectorySpec,
    /// Pseudorange epochs per second.
    pub gnss_rate: f64,
    /// Flow measurements per second.
    pub flow_rate: f64,
    /// Per-axis sigma of synthesized flow velocities and the value reported
    /// to the filter for rendered ones (m/s).
    pub flow_sigma: f64,
    pub error_budget: ErrorBudget,
    pub multipath_bursts: Vec<MultipathBurst>,
    pub spoof: Option<SpoofProfile>,
    /// When set, flow comes from rendered frame pairs instead of
    /// `synth_flow_measurement`.
    pub camera: Option<CameraModel>,
    pub texture_seed: u64,
    /// Ground texture feature size (m).
    pub texture_cell: f64,
    pub rng_seed: u64,
    /// Replaces the default constellation when present.
    pub constellation: Option<Vec<OrbitalElements>>,
    pub elevation_mask_deg: f64,
    pub estimator: EstimatorConfig,
    pub enforce_service_area: bool,
    pub service_area: ServiceArea,
}

pub const DEFAULT_ELEVATION_MASK_DEG: f64 = 5.0;
pub const DEFAULT_TEXTURE_CELL: f64 = 20.0;

/// 64x64 nadir camera at 100 m with 0.5 m ground pixels.
pub fn default_camera() -> CameraModel {
    CameraModel {
        focal_px: 200.0,
        cx: 31.5,
        cy: 31.5,
        width: 64,
        height: 64,
        height_agl: 100.0,
        heading: 0.0,
    }
}

impl Scenario {
    /// A scenario with defaults for everything but the trajectory.
    pub fn new(name: impl Into<String>, trajectory: TrajectorySpec) -> Self {
        Self {
            name: name.into(),
            trajectory,
            gnss_rate: 1.0,
            flow_rate: 10.0,
            flow_sigma: 0.2,
            error_budget: ErrorBudget::default(),
            multipath_bursts: Vec::new(),
            spoof: None,
            camera: None,
            texture_seed: 0,
            texture_cell: DEFAULT_TEXTURE_CELL,
            rng_seed: 0,
            constellation: None,
            elevation_mask_deg: DEFAULT_ELEVATION_MASK_DEG,
            estimator: EstimatorConfig::default(),
            enforce_service_area: true,
            service_area: ServiceArea::default(),
        }
    }

    pub fn constellation(&self) -> Vec<OrbitalElements> {
        self.constellation.clone().unwrap_or_else(default_navic_constellation)
    }

    pub fn validate(&self) -> Result<()> {
        self.trajectory.validate()?;
        if !(self.gnss_rate > 0.0 && self.gnss_rate.is_finite()) {
            return Err(Error::invalid("gnss_rate", format!("{} must be > 0", self.gnss_rate)));
        }
        if !(self.flow_rate > 0.0 && self.flow_rate.is_finite()) {
            return Err(Error::invalid("flow_rate", format!("{} must be > 0", self.flow_rate)));
        }
        if !(self.flow_sigma >= 0.0 && self.flow_sigma.is_finite()) {
            return Err(Error::invalid("flow_sigma", "must be non-negative"));
        }
        if !(self.texture_cell > 0.0) {
            return Err(Error::invalid("texture_cell", "must be positive"));
        }
        if !(0.0..90.0).contains(&self.elevation_mask_deg) {
            return Err(Error::invalid("elevation_mask_deg", "must lie in [0, 90)"));
        }
        self.error_budget.validate()?;
        for b in &self.multipath_bursts {
            if !(b.start <= b.end) {
                return Err(Error::invalid("multipath_bursts", "start must not exceed end"));
            }
        }
        if let Some(spoof) = &self.spoof {
            spoof.validate()?;
        }
        if let Some(cam) = &self.camera {
            cam.validate()?;
        }
        if let Some(c) = &self.constellation {
            if c.is_empty() {
                return Err(Error::invalid("constellation", "override must not be empty"));
            }
            for el in c {
                el.validate()?;
            }
        }
        self.estimator.validate()?;
        self.service_area.validate()?;
        let start = self.trajectory.origin();
        if self.enforce_service_area && !in_service_area(&start, &self.service_area) {
            return Err(Error::OutsideServiceArea {
                lat: start.lat_deg(),
                lon: start.lon_deg(),
            });
        }
        Ok(())
    }
}

fn coord(lat: f64, lon: f64, alt: f64) -> GeodeticCoord {
    GeodeticCoord::from_degrees(lat, lon, alt).expect("literal coordinates are valid")
}

/// Straight 10 m/s drive out of New Delhi with 5 m range noise and a 200 s
/// multipath burst on the two lowest satellites; the reference setting for
/// comparing flow-aided and GNSS-only estimation.
pub fn canonical_degraded_scenario() -> Scenario {
    let mut s = Scenario::new(
        "canonical_degraded",
        TrajectorySpec::Line {
            start: coord(28.6139, 77.209, 216.0),
            duration: 600.0,
            speed: 10.0,
            heading: 30.0,
        },
    );
    s.error_budget = ErrorBudget {
        noise_sigma: 5.0,
        multipath_bias: 15.0,
        clock_bias_user: 300.0,
        clock_drift_user: 0.05,
        ..ErrorBudget::default()
    };
    s.multipath_bursts = vec![MultipathBurst {
        start: 200.0,
        end: 400.0,
        lowest_count: 2,
    }];
    s.flow_sigma = 0.2;
    s.rng_seed = 1;
    s.estimator.process = ProcessConfig {
        accel_psd: 0.5,
        ..ProcessConfig::default()
    };
    s.estimator.range_gate_alpha = Some(0.01);
    s
}

/// Clean cruise with a 1 m/s range ramp on two satellites from t = 120 s.
pub fn canonical_spoof_scenario() -> Scenario {
    let mut s = Scenario::new(
        "canonical_spoof",
        TrajectorySpec::Line {
            start: coord(15.4, 73.8, 10.0),
            duration: 300.0,
            speed: 10.0,
            heading: 30.0,
        },
    );
    s.error_budget = ErrorBudget {
        noise_sigma: 2.0,
        clock_bias_user: 300.0,
        clock_drift_user: 0.05,
        ..ErrorBudget::default()
    };
    s.spoof = Some(SpoofProfile {
        start_epoch: 120.0,
        ramp_rate: 1.0,
        affected_sat_ids: [crate::constellation::SatId(3), crate::constellation::SatId(6)]
            .into_iter()
            .collect(),
    });
    s
}

/// Longitude offset applied to every slot of the default constellation so
/// that it covers the walk site in Massachusetts.
pub const FIGURE_XI_CONSTELLATION_SHIFT_DEG: f64 = -154.3;

pub const FIGURE_XI_LAT: (f64, f64) = (42.28245, 42.28255);
pub const FIGURE_XI_LON: (f64, f64) = (-71.34305, -71.34295);
pub const FIGURE_XI_ALT: (f64, f64) = (40.0, 63.0);

/// A 720 s walk near (42.2825, -71.343) whose latitude, longitude and
/// altitude traces span the `FIGURE_XI_*` bounds exactly.
pub fn canonical_figure_xi_scenario() -> Scenario {
    let (lat0, lat1) = FIGURE_XI_LAT;
    let (lon0, lon1) = FIGURE_XI_LON;
    let (alt0, alt1) = FIGURE_XI_ALT;
    let points = [
        (0.0, lat0, lon0, alt0),
        (180.0, lat1, -71.34300, 48.0),
        (360.0, 42.28250, lon1, alt1),
        (540.0, 42.28248, -71.34299, 55.0),
        (720.0, 42.28246, -71.34303, 44.0),
    ];
    let waypoints = points
        .iter()
        .map(|&(time, lat, lon, alt)| Waypoint {
            time,
            position: coord(lat, lon, alt),
        })
        .collect();
    let mut s = Scenario::new(
        "figure_xi_walk",
        TrajectorySpec::Waypoints {
            duration: 720.0,
            waypoints,
        },
    );
    s.error_budget = ErrorBudget {
        noise_sigma: 3.0,
        clock_bias_user: 300.0,
        ..ErrorBudget::default()
    };
    s.flow_sigma = 0.05;
    s.enforce_service_area = false;
    s.constellation = Some(
        default_navic_constellation()
            .into_iter()
            .map(|mut el| {
                el.raan += FIGURE_XI_CONSTELLATION_SHIFT_DEG;
                el
            })
            .collect(),
    );
    s
}
