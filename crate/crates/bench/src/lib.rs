//! Fixtures shared by the benchmarks.

use ofgnss_core::constellation::{default_navic_constellation, visible_satellites};
use ofgnss_core::estimator::{InitConfig, MotionModel, NavState};
use ofgnss_core::geodesy::geodetic_to_ecef;
use ofgnss_core::texture::{translated_pair, GroundTexture};
use ofgnss_core::{GeodeticCoord, ImageFrame, PseudorangeMeas, SatelliteState};

/// Square frame pair with a sub-pixel translation.
pub fn flow_pair(size: usize) -> (ImageFrame, ImageFrame) {
    translated_pair(&GroundTexture::new(7, 20.0), size, size, (0.7, -1.3), 0.1)
}

/// Filter state near Delhi plus one epoch of noiseless pseudoranges.
pub fn ekf_epoch() -> (NavState, Vec<PseudorangeMeas>, Vec<SatelliteState>) {
    let site = GeodeticCoord::from_degrees(28.6139, 77.209, 216.0).expect("valid site");
    let user = geodetic_to_ecef(&site);
    let sats: Vec<SatelliteState> = visible_satellites(&site, 0.0, 5.0, &default_navic_constellation())
        .expect("visibility")
        .into_iter()
        .map(|v| v.state)
        .collect();
    let meas = sats
        .iter()
        .map(|s| PseudorangeMeas {
            sat_id: s.sat_id,
            rho: s.pos.distance(&user) + 300.0 - s.clock_bias,
            sigma: 5.0,
            epoch: 0.0,
        })
        .collect();
    let state = NavState::from_fix(MotionModel::ConstantVelocity, user, 290.0, 0.0, &InitConfig::default());
    (state, meas, sats)
}
