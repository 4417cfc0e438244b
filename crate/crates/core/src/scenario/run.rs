use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::render::rendered_velocity;
use super::trajectory::{truth_at, TruthSample};
use super::Scenario;
use crate::constellation::{visible_satellites, SatId, SatelliteState};
use crate::error::{Error, Result};
use crate::estimator::{
    ekf_predict, ekf_update_epoch_gated, ekf_update_flow, ls_position_fix, InnovationRecord, NavState, SpoofDetector,
};
use crate::geodesy::{ecef_to_enu, ecef_to_geodetic, enu_rotation, EcefCoord, EnuCoord, GeodeticCoord};
use crate::measurements::{
    apply_spoof, synth_flow_measurement, synth_pseudorange, FlowVelocityMeas, NoiseStreams, PseudorangeMeas, MIN_SIGMA,
};
use crate::texture::GroundTexture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    OfGnss,
    GnssOnly,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::OfGnss => "of_gnss",
            RunMode::GnssOnly => "gnss_only",
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "of_gnss" => Ok(RunMode::OfGnss),
            "gnss_only" => Ok(RunMode::GnssOnly),
            other => Err(format!("unknown mode `{other}` (expected of_gnss or gnss_only)")),
        }
    }
}

/// State of one GNSS estimation epoch. ENU positions and velocities are in
/// the tangent frame of the trajectory start; `err_enu` is in the frame of
/// the truth position.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: f64,
    pub truth: GeodeticCoord,
    pub truth_enu: EnuCoord,
    pub truth_vel: Vector3<f64>,
    pub estimate: GeodeticCoord,
    pub estimate_enu: EnuCoord,
    pub estimate_vel: Vector3<f64>,
    pub err_enu: EnuCoord,
    pub covariance_diagonal: Vec<f64>,
    /// Pre-update pseudorange innovations.
    pub residuals: Vec<(SatId, f64)>,
    pub nis: f64,
    pub dof: usize,
    pub n_sats: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub horizontal_rmse: f64,
    pub vertical_rmse: f64,
    pub max_horizontal_error: f64,
    pub velocity_rmse: f64,
    pub detection_latency: Option<f64>,
    pub improvement_vs_baseline: Option<f64>,
}

impl RunMetrics {
    pub fn from_records(records: &[EpochRecord], spoof_start: Option<f64>) -> Self {
        let n = records.len().max(1) as f64;
        let rms = |f: &dyn Fn(&EpochRecord) -> f64| (records.iter().map(|r| f(r).powi(2)).sum::<f64>() / n).sqrt();
        let detection_latency = spoof_start.and_then(|start| {
            records
                .iter()
                .find(|r| r.flagged && r.epoch >= start)
                .map(|r| r.epoch - start)
        });
        Self {
            horizontal_rmse: rms(&|r| r.err_enu.horizontal_norm()),
            vertical_rmse: rms(&|r| r.err_enu.up),
            max_horizontal_error: records.iter().map(|r| r.err_enu.horizontal_norm()).fold(0.0, f64::max),
            velocity_rmse: rms(&|r| (r.estimate_vel - r.truth_vel).norm()),
            detection_latency,
            improvement_vs_baseline: None,
        }
    }

    /// Plain `key: value` lines, one metric per line.
    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"));
        format!(
            "horizontal_rmse_m: {:.6}\nvertical_rmse_m: {:.6}\nmax_horizontal_error_m: {:.6}\nvelocity_rmse_mps: {:.6}\ndetection_latency_s: {}\nimprovement_vs_baseline_pct: {}\n",
            self.horizontal_rmse,
            self.vertical_rmse,
            self.max_horizontal_error,
            self.velocity_rmse,
            opt(self.detection_latency),
            opt(self.improvement_vs_baseline),
        )
    }
}

/// Percentage by which `a` improves on baseline `b` in horizontal RMSE.
pub fn compare_runs(a: &RunMetrics, b: &RunMetrics) -> Result<f64> {
    if b.horizontal_rmse == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(100.0 * (b.horizontal_rmse - a.horizontal_rmse) / b.horizontal_rmse)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Verify covariance symmetry and positive definiteness after every
    /// filter step.
    pub check_covariance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<EpochRecord>,
    pub metrics: RunMetrics,
    /// Flow measurements applied to the filter, with their update NIS.
    pub flow: Vec<(FlowVelocityMeas, InnovationRecord)>,
}

pub fn run_scenario(s: &Scenario, mode: RunMode) -> Result<RunOutput> {
    run_scenario_with(s, mode, RunOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Gnss(f64),
    Flow(f64),
}

impl Event {
    fn time(self) -> f64 {
        match self {
            Event::Gnss(t) | Event::Flow(t) => t,
        }
    }
}

/// GNSS and flow instants merged in time order; GNSS first on ties.
fn schedule(s: &Scenario, mode: RunMode) -> Vec<Event> {
    let duration = s.trajectory.duration();
    let ticks = |rate: f64| (0..).map(move |k| k as f64 / rate).take_while(move |&t| t <= duration);
    let mut events: Vec<Event> = ticks(s.gnss_rate).map(Event::Gnss).collect();
    if mode == RunMode::OfGnss {
        events.extend(ticks(s.flow_rate).skip(1).map(Event::Flow));
    }
    events.sort_by(|a, b| {
        a.time()
            .total_cmp(&b.time())
            .then_with(|| matches!(a, Event::Flow(_)).cmp(&matches!(b, Event::Flow(_))))
    });
    events
}

struct Runner<'a> {
    s: &'a Scenario,
    opts: RunOptions,
    origin: GeodeticCoord,
    constellation: Vec<crate::constellation::OrbitalElements>,
    texture: GroundTexture,
    streams: NoiseStreams,
    detector: SpoofDetector,
    gate: Option<f64>,
    state: Option<NavState>,
    records: Vec<EpochRecord>,
    flow: Vec<(FlowVelocityMeas, InnovationRecord)>,
}

impl<'a> Runner<'a> {
    fn checked(&self, state: NavState) -> Result<NavState> {
        if self.opts.check_covariance {
            state.check_covariance()?;
        }
        Ok(state)
    }

    fn predict_to(&mut self, t: f64) -> Result<Option<NavState>> {
        let Some(state) = self.state.take() else {
            return Ok(None);
        };
        let next = ekf_predict(&state, t - state.epoch, &self.s.estimator.process)?;
        Ok(Some(self.checked(next)?))
    }

    fn measure(&mut self, truth: &TruthSample) -> Result<(Vec<PseudorangeMeas>, Vec<SatelliteState>)> {
        let t = truth.t;
        let visible = visible_satellites(&truth.position, t, self.s.elevation_mask_deg, &self.constellation)?;
        let mut by_elevation: Vec<_> = visible.iter().map(|v| (v.look.elevation, v.state.sat_id)).collect();
        by_elevation.sort_by(|a, b| a.0.total_cmp(&b.0));
        let burst_count = self
            .s
            .multipath_bursts
            .iter()
            .filter(|b| b.contains(t))
            .map(|b| b.lowest_count)
            .max()
            .unwrap_or(0);
        let affected: Vec<SatId> = by_elevation.iter().take(burst_count).map(|&(_, id)| id).collect();

        let mut meas = Vec::with_capacity(visible.len());
        let mut sats = Vec::with_capacity(visible.len());
        for v in &visible {
            let m = synth_pseudorange(
                &v.state,
                &truth.ecef,
                v.look.elevation_deg(),
                &self.s.error_budget,
                affected.contains(&v.state.sat_id),
                t,
                &mut self.streams,
            )?;
            let m = match &self.s.spoof {
                Some(p) => apply_spoof(m, p, t),
                None => m,
            };
            meas.push(m);
            sats.push(v.state);
        }
        Ok((meas, sats))
    }

    fn gnss_epoch(&mut self, t: f64) -> Result<()> {
        let truth = truth_at(&self.s.trajectory, t)?;
        let (meas, sats) = self.measure(&truth)?;
        let (state, record) = match self.predict_to(t)? {
            None => {
                if meas.len() < 4 {
                    return Ok(());
                }
                let fix = ls_position_fix(&meas, &sats, EcefCoord::new(0.0, 0.0, 0.0))?;
                let state = NavState::from_fix(
                    self.s.estimator.process.model,
                    fix.pos,
                    fix.clock_bias,
                    t,
                    &self.s.estimator.init,
                );
                (self.checked(state)?, InnovationRecord::new(t, 0.0, 0))
            }
            Some(prior) if meas.is_empty() => (prior, InnovationRecord::new(t, 0.0, 0)),
            Some(prior) => {
                let (post, innovations) = ekf_update_epoch_gated(&prior, &meas, &sats, self.gate)?;
                let combined = InnovationRecord::combine(t, innovations.iter().map(|i| i.record(t)));
                let residuals = innovations.iter().map(|i| (i.sat_id, i.innovation)).collect();
                let post = self.checked(post)?;
                self.push_record(&truth, &post, residuals, combined, meas.len())?;
                self.state = Some(post);
                return Ok(());
            }
        };
        self.push_record(&truth, &state, Vec::new(), record, meas.len())?;
        self.state = Some(state);
        Ok(())
    }

    fn push_record(
        &mut self,
        truth: &TruthSample,
        state: &NavState,
        residuals: Vec<(SatId, f64)>,
        innovation: InnovationRecord,
        n_sats: usize,
    ) -> Result<()> {
        let innovation = self.detector.push(innovation);
        let rot = enu_rotation(&self.origin);
        self.records.push(EpochRecord {
            epoch: truth.t,
            truth: truth.position,
            truth_enu: truth.enu,
            truth_vel: truth.velocity,
            estimate: ecef_to_geodetic(&state.pos())?,
            estimate_enu: ecef_to_enu(&state.pos(), &self.origin),
            estimate_vel: rot * state.vel(),
            err_enu: EnuCoord::from_vector(&(enu_rotation(&truth.position) * (state.pos() - truth.ecef))),
            covariance_diagonal: state.covariance().diagonal().iter().copied().collect(),
            residuals,
            nis: innovation.nis,
            dof: innovation.dof,
            n_sats,
            flagged: innovation.flagged,
        });
        Ok(())
    }

    fn flow_measurement(&mut self, t: f64) -> Result<Option<FlowVelocityMeas>> {
        let truth = truth_at(&self.s.trajectory, t)?;
        match &self.s.camera {
            None => {
                let v = (truth.velocity.x, truth.velocity.y);
                Ok(Some(synth_flow_measurement(v, self.s.flow_sigma, &mut self.streams, t)?))
            }
            Some(cam) => {
                let t0 = (t - 1.0 / self.s.flow_rate).max(0.0);
                let before = truth_at(&self.s.trajectory, t0)?;
                let v = rendered_velocity(
                    (before.enu.east, before.enu.north),
                    (truth.enu.east, truth.enu.north),
                    cam,
                    &self.texture,
                    t0,
                    t,
                )?;
                Ok(v.map(|(e, n)| FlowVelocityMeas {
                    v_east: e,
                    v_north: n,
                    sigma: self.s.flow_sigma.max(MIN_SIGMA),
                    epoch: t,
                }))
            }
        }
    }

    fn flow_epoch(&mut self, t: f64) -> Result<()> {
        if self.state.is_none() {
            return Ok(());
        }
        let Some(m) = self.flow_measurement(t)? else {
            return Ok(());
        };
        let prior = self.predict_to(t)?.expect("state present");
        let (post, record) = ekf_update_flow(&prior, &m, &self.origin)?;
        self.flow.push((m, record));
        self.state = Some(self.checked(post)?);
        Ok(())
    }
}

/// Simulates `s` end to end. Flow updates are applied only in
/// [`RunMode::OfGnss`]; the filter starts from a least-squares fix at the
/// first epoch with four or more satellites.
pub fn run_scenario_with(s: &Scenario, mode: RunMode, opts: RunOptions) -> Result<RunOutput> {
    s.validate()?;
    let mut runner = Runner {
        s,
        opts,
        origin: s.trajectory.origin(),
        constellation: s.constellation(),
        texture: GroundTexture::new(s.texture_seed, s.texture_cell),
        streams: NoiseStreams::new(s.rng_seed),
        detector: SpoofDetector::new(s.estimator.detector)?,
        gate: s.estimator.range_gate(),
        state: None,
        records: Vec::new(),
        flow: Vec::new(),
    };
    for event in schedule(s, mode) {
        let result = match event {
            Event::Gnss(t) => runner.gnss_epoch(t),
            Event::Flow(t) => runner.flow_epoch(t),
        };
        result.map_err(|e| e.at_epoch(event.time()))?;
    }
    let metrics = RunMetrics::from_records(&runner.records, s.spoof.as_ref().map(|p| p.start_epoch));
    Ok(RunOutput {
        records: runner.records,
        metrics,
        flow: runner.flow,
    })
}
