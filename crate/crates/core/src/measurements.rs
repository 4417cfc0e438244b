//! Synthetic GNSS pseudoranges with a simple error budget, optical-flow
//! velocity measurements, and ramp spoofing.
//!
//! Every noise source draws from its own seeded stream so that switching one
//! source off leaves the others' sequences untouched.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::{SatId, SatelliteState};
use crate::error::{Error, Result};
use crate::geodesy::EcefCoord;

/// Floor applied to reported measurement sigmas (m or m/s).
pub const MIN_SIGMA: f64 = 0.01;

/// Range error sources. All terms in metres (drift in m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBudget {
    pub iono_zenith: f64,
    pub tropo_zenith: f64,
    pub multipath_sigma: f64,
    /// Added to affected satellites during configured multipath bursts.
    pub multipath_bias: f64,
    pub noise_sigma: f64,
    pub clock_bias_user: f64,
    pub clock_drift_user: f64,
}

impl ErrorBudget {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.iono_zenith,
            self.tropo_zenith,
            self.multipath_sigma,
            self.multipath_bias,
            self.noise_sigma,
            self.clock_bias_user,
            self.clock_drift_user,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("error_budget", "non-finite value"));
        }
        if self.multipath_sigma < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::invalid("error_budget", "sigmas must be non-negative"));
        }
        Ok(())
    }

    /// One-sigma of the random part of a pseudorange.
    pub fn measurement_sigma(&self) -> f64 {
        self.noise_sigma.hypot(self.multipath_sigma).max(MIN_SIGMA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudorangeMeas {
    pub sat_id: SatId,
    pub rho: f64,
    pub sigma: f64,
    pub epoch: f64,
}

/// Linearly growing range offset injected into selected satellites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpoofProfile {
    pub start_epoch: f64,
    /// Metres per second.
    pub ramp_rate: f64,
    pub affected_sat_ids: BTreeSet<SatId>,
}

impl SpoofProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_epoch >= 0.0) {
            return Err(Error::invalid("spoof.start_epoch", "must be >= 0"));
        }
        if !self.ramp_rate.is_finite() {
            return Err(Error::invalid("spoof.ramp_rate", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowVelocityMeas {
    pub v_east: f64,
    pub v_north: f64,
    pub sigma: f64,
    pub epoch: f64,
}

/// Independent named random streams derived from one seed.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    pub pseudorange: ChaCha8Rng,
    pub multipath: ChaCha8Rng,
    pub flow: ChaCha8Rng,
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            pseudorange: stream(1),
            multipath: stream(2),
            flow: stream(3),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Euclidean satellite-to-user distance.
pub fn geometric_range(sat: &SatelliteState, user: &EcefCoord) -> Result<f64> {
    let r = sat.pos.distance(user);
    if r < 1.0 {
        return Err(Error::DegenerateGeometry("satellite within 1 m of user"));
    }
    Ok(r)
}

/// Elevation mapping applied to zenith atmospheric delays.
pub fn obliquity(elevation_deg: f64) -> f64 {
    1.0 / elevation_deg.to_radians().sin()
}

/// Pseudorange with clock, atmospheric, multipath and white-noise terms.
///
/// `multipath_active` selects whether the burst bias applies to this
/// satellite at this epoch; the multipath white noise is always drawn.
pub fn synth_pseudorange(
    sat: &SatelliteState,
    user: &EcefCoord,
    elevation_deg: f64,
    budget: &ErrorBudget,
    multipath_active: bool,
    t: f64,
    streams: &mut NoiseStreams,
) -> Result<PseudorangeMeas> {
    if !(elevation_deg > 0.0) {
        return Err(Error::NonPositiveElevation(elevation_deg));
    }
    let range = geometric_range(sat, user)?;
    let clock = budget.clock_bias_user + budget.clock_drift_user * t - sat.clock_bias;
    let atmosphere = (budget.iono_zenith + budget.tropo_zenith) * obliquity(elevation_deg);
    let bias = if multipath_active { budget.multipath_bias } else { 0.0 };
    let multipath = bias + budget.multipath_sigma * gaussian(&mut streams.multipath);
    let noise = budget.noise_sigma * gaussian(&mut streams.pseudorange);
    Ok(PseudorangeMeas {
        sat_id: sat.sat_id,
        rho: range + clock + atmosphere + multipath + noise,
        sigma: budget.measurement_sigma(),
        epoch: t,
    })
}

/// Adds the spoof ramp if the satellite is affected and the ramp has started.
pub fn apply_spoof(meas: PseudorangeMeas, profile: &SpoofProfile, t: f64) -> PseudorangeMeas {
    if t >= profile.start_epoch && profile.affected_sat_ids.contains(&meas.sat_id) {
        PseudorangeMeas {
            rho: meas.rho + profile.ramp_rate * (t - profile.start_epoch),
            ..meas
        }
    } else {
        meas
    }
}

/// Horizontal velocity plus independent Gaussian noise per axis.
pub fn synth_flow_measurement(
    true_vel_en: (f64, f64),
    sigma: f64,
    streams: &mut NoiseStreams,
    epoch: f64,
) -> Result<FlowVelocityMeas> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid("flow sigma", "must be non-negative"));
    }
    let ne = gaussian(&mut streams.flow);
    let nn = gaussian(&mut streams.flow);
    Ok(FlowVelocityMeas {
        v_east: true_vel_en.0 + sigma * ne,
        v_north: true_vel_en.1 + sigma * nn,
        sigma: sigma.max(MIN_SIGMA),
        epoch,
    })
}
