use std::collections::BTreeSet;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::constellation::SatelliteState;
use crate::error::{Error, Result};
use crate::geodesy::{ecef_to_geodetic, enu_rotation, EcefCoord};
use crate::measurements::PseudorangeMeas;

const MAX_ITERATIONS: usize = 20;
const STEP_TOLERANCE: f64 = 1e-4;
const MAX_CONDITION: f64 = 1e12;

/// Dilution-of-precision figures; horizontal and vertical in the local ENU frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub gdop: f64,
    pub pdop: f64,
    pub hdop: f64,
    pub vdop: f64,
    pub tdop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionFix {
    pub pos: EcefCoord,
    /// Receiver clock bias (m).
    pub clock_bias: f64,
    pub geometry: GeometryReport,
    pub iterations: usize,
}

fn condition_checked(n: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let eig = n.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularGeometry(cond));
    }
    n.try_inverse().ok_or(Error::SingularGeometry(cond))
}

fn geometry_row(sat: &SatelliteState, user: &Vector3<f64>) -> Result<(f64, Vector4<f64>)> {
    let d = user - sat.pos.to_vector();
    let range = d.norm();
    if range < 1e-3 {
        return Err(Error::DegenerateGeometry("satellite coincides with user"));
    }
    let u = d / range;
    Ok((range, Vector4::new(u.x, u.y, u.z, 1.0)))
}

fn dops(cofactor: &Matrix4<f64>, user: &EcefCoord) -> Result<GeometryReport> {
    let g = ecef_to_geodetic(user)?;
    let rot = enu_rotation(&g);
    let pos_block: Matrix3<f64> = cofactor.fixed_view::<3, 3>(0, 0).into_owned();
    let enu = rot * pos_block * rot.transpose();
    Ok(GeometryReport {
        gdop: cofactor.trace().sqrt(),
        pdop: pos_block.trace().sqrt(),
        hdop: (enu[(0, 0)] + enu[(1, 1)]).sqrt(),
        vdop: enu[(2, 2)].sqrt(),
        tdop: cofactor[(3, 3)].sqrt(),
    })
}

/// Weighted Gauss-Newton solution of `rho_i = |sat_i - pos| + b`.
///
/// `meas[i]` must belong to `sats[i]`.
pub fn ls_position_fix(
    meas: &[PseudorangeMeas],
    sats: &[SatelliteState],
    initial_guess: EcefCoord,
) -> Result<PositionFix> {
    if meas.len() != sats.len() {
        return Err(Error::invalid("position fix", "measurement/satellite count mismatch"));
    }
    if meas.iter().zip(sats).any(|(m, s)| m.sat_id != s.sat_id) {
        return Err(Error::invalid("position fix", "measurement/satellite id mismatch"));
    }
    let distinct: BTreeSet<_> = meas.iter().map(|m| m.sat_id).collect();
    if distinct.len() < 4 {
        return Err(Error::InsufficientSatellites(distinct.len()));
    }
    if meas.iter().any(|m| !(m.sigma > 0.0)) {
        return Err(Error::invalid("pseudorange sigma", "must be positive"));
    }

    let mut x = Vector4::new(initial_guess.x, initial_guess.y, initial_guess.z, 0.0);
    for iteration in 1..=MAX_ITERATIONS {
        let user = x.fixed_rows::<3>(0).into_owned();
        let mut normal = Matrix4::zeros();
        let mut rhs = Vector4::zeros();
        for (m, sat) in meas.iter().zip(sats) {
            let (range, row) = geometry_row(sat, &user)?;
            let w = 1.0 / (m.sigma * m.sigma);
            let residual = m.rho + sat.clock_bias - (range + x[3]);
            normal += w * row * row.transpose();
            rhs += w * residual * row;
        }
        let step = condition_checked(&normal)? * rhs;
        x += step;
        if step.norm() < STEP_TOLERANCE {
            let pos = EcefCoord::new(x[0], x[1], x[2]);
            return Ok(PositionFix {
                pos,
                clock_bias: x[3],
                geometry: gdop(sats, pos)?,
                iterations: iteration,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "ls_position_fix",
        iterations: MAX_ITERATIONS,
    })
}

/// DOPs from `(GᵀG)⁻¹` with rows `(unit line of sight, 1)`.
pub fn gdop(sats: &[SatelliteState], user: EcefCoord) -> Result<GeometryReport> {
    if sats.len() < 4 {
        return Err(Error::InsufficientSatellites(sats.len()));
    }
    let u = user.to_vector();
    let mut normal = Matrix4::zeros();
    for sat in sats {
        let (_, row) = geometry_row(sat, &u)?;
        normal += row * row.transpose();
    }
    dops(&condition_checked(&normal)?, &user)
}
