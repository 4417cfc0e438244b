use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::state::{symmetrize, NavState, POS, VEL};
use crate::constellation::{SatId, SatelliteState};
use crate::error::{Error, Result};
use crate::geodesy::{enu_rotation, EcefCoord, GeodeticCoord};
use crate::measurements::{FlowVelocityMeas, PseudorangeMeas};

/// Normalized innovation squared of one update (or one epoch of updates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationRecord {
    pub epoch: f64,
    pub nis: f64,
    pub dof: usize,
    pub flagged: bool,
}

impl InnovationRecord {
    pub fn new(epoch: f64, nis: f64, dof: usize) -> Self {
        Self {
            epoch,
            nis,
            dof,
            flagged: false,
        }
    }

    /// Sums NIS and degrees of freedom of records from one epoch.
    pub fn combine(epoch: f64, records: impl IntoIterator<Item = InnovationRecord>) -> Self {
        records
            .into_iter()
            .fold(Self::new(epoch, 0.0, 0), |acc, r| Self::new(epoch, acc.nis + r.nis, acc.dof + r.dof))
    }
}

/// Pre-update innovation of one pseudorange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeInnovation {
    pub sat_id: SatId,
    pub innovation: f64,
    pub variance: f64,
    /// False when the innovation gate rejected the measurement.
    pub accepted: bool,
}

impl RangeInnovation {
    pub fn record(&self, epoch: f64) -> InnovationRecord {
        InnovationRecord::new(epoch, self.innovation * self.innovation / self.variance, 1)
    }
}

/// Predicted pseudorange and its Jacobian row at state `s`.
fn range_model(s: &NavState, sat: &SatelliteState) -> Result<(f64, DVector<f64>)> {
    let los: Vector3<f64> = s.pos() - sat.pos;
    let range = los.norm();
    if range < 1e-3 {
        return Err(Error::DegenerateGeometry("satellite coincides with state position"));
    }
    let mut h = DVector::zeros(s.dim());
    h.fixed_rows_mut::<3>(POS).copy_from(&(los / range));
    h[s.model.clock_index()] = 1.0;
    Ok((range + s.clock_bias() - sat.clock_bias, h))
}

/// Joseph-form scalar update; returns the innovation variance.
fn scalar_update(x: &mut DVector<f64>, p: &mut DMatrix<f64>, h: &DVector<f64>, innovation: f64, r: f64) -> f64 {
    let ph = &*p * h;
    let s = h.dot(&ph) + r;
    let k = ph / s;
    *x += &k * innovation;
    let n = x.len();
    let a = DMatrix::identity(n, n) - &k * h.transpose();
    *p = &a * &*p * a.transpose() + &k * k.transpose() * r;
    symmetrize(p);
    s
}

/// Joseph-form vector update; returns the NIS.
fn vector_update(
    s: &NavState,
    h: &DMatrix<f64>,
    innovation: &DVector<f64>,
    r: &DMatrix<f64>,
) -> Result<(NavState, f64)> {
    let p = &s.covariance;
    let pht = p * h.transpose();
    let innov_cov = h * &pht + r;
    let chol = innov_cov
        .clone()
        .cholesky()
        .ok_or(Error::SingularGeometry(f64::INFINITY))?;
    let k = pht * chol.inverse();
    let nis = innovation.dot(&chol.solve(innovation));
    let n = s.dim();
    let a = DMatrix::identity(n, n) - &k * h;
    let mut cov = &a * p * a.transpose() + &k * r * k.transpose();
    symmetrize(&mut cov);
    Ok((
        NavState {
            model: s.model,
            x: &s.x + &k * innovation,
            covariance: cov,
            epoch: s.epoch,
        },
        nis,
    ))
}

/// Scalar EKF update with `h(x) = |sat - pos| + clock_bias - sat_clock`.
pub fn ekf_update_pseudorange(
    s: &NavState,
    m: &PseudorangeMeas,
    sat: &SatelliteState,
) -> Result<(NavState, InnovationRecord)> {
    if !(m.sigma > 0.0) {
        return Err(Error::invalid("pseudorange sigma", "must be positive"));
    }
    let (predicted, h) = range_model(s, sat)?;
    let innovation = m.rho - predicted;
    let mut next = s.clone();
    let var = scalar_update(&mut next.x, &mut next.covariance, &h, innovation, m.sigma * m.sigma);
    Ok((next, InnovationRecord::new(s.epoch, innovation * innovation / var, 1)))
}

/// Applies all pseudoranges of one epoch as sequential scalar updates with
/// the Jacobians and predictions frozen at the incoming state, which makes
/// the posterior independent of measurement order.
pub fn ekf_update_epoch(
    s: &NavState,
    meas: &[PseudorangeMeas],
    sats: &[SatelliteState],
) -> Result<(NavState, Vec<RangeInnovation>)> {
    ekf_update_epoch_gated(s, meas, sats, None)
}

/// As [`ekf_update_epoch`], skipping measurements whose NIS against the
/// incoming state exceeds `gate`. Rejected measurements are reported with
/// that prior innovation and variance.
pub fn ekf_update_epoch_gated(
    s: &NavState,
    meas: &[PseudorangeMeas],
    sats: &[SatelliteState],
    gate: Option<f64>,
) -> Result<(NavState, Vec<RangeInnovation>)> {
    if meas.len() != sats.len() {
        return Err(Error::invalid("epoch update", "measurement/satellite count mismatch"));
    }
    let linearized = meas
        .iter()
        .zip(sats)
        .map(|(m, sat)| {
            if m.sat_id != sat.sat_id {
                return Err(Error::invalid("epoch update", "measurement/satellite id mismatch"));
            }
            if !(m.sigma > 0.0) {
                return Err(Error::invalid("pseudorange sigma", "must be positive"));
            }
            let (predicted, h) = range_model(s, sat)?;
            Ok((m, predicted, h))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut next = s.clone();
    let mut innovations = Vec::with_capacity(meas.len());
    for (m, predicted, h) in linearized {
        let r = m.sigma * m.sigma;
        let prior_innovation = m.rho - predicted;
        if let Some(g) = gate {
            let prior_var = h.dot(&(&s.covariance * &h)) + r;
            if prior_innovation * prior_innovation / prior_var > g {
                innovations.push(RangeInnovation {
                    sat_id: m.sat_id,
                    innovation: prior_innovation,
                    variance: prior_var,
                    accepted: false,
                });
                continue;
            }
        }
        // innovation against the frozen linearization, shifted by the
        // correction already applied this epoch
        let innovation = prior_innovation - h.dot(&(&next.x - &s.x));
        let var = scalar_update(&mut next.x, &mut next.covariance, &h, innovation, r);
        innovations.push(RangeInnovation {
            sat_id: m.sat_id,
            innovation,
            variance: var,
            accepted: true,
        });
    }
    Ok((next, innovations))
}

/// Velocity update from a horizontal ground-velocity measurement expressed
/// in the ENU frame at `origin`.
pub fn ekf_update_flow(
    s: &NavState,
    m: &FlowVelocityMeas,
    origin: &GeodeticCoord,
) -> Result<(NavState, InnovationRecord)> {
    if !(m.sigma > 0.0) {
        return Err(Error::invalid("flow sigma", "must be positive"));
    }
    let rot = enu_rotation(origin);
    let mut h = DMatrix::zeros(2, s.dim());
    for row in 0..2 {
        for col in 0..3 {
            h[(row, VEL + col)] = rot[(row, col)];
        }
    }
    let z = DVector::from_vec(vec![m.v_east, m.v_north]);
    let innovation = z - &h * &s.x;
    let r = DMatrix::from_diagonal_element(2, 2, m.sigma * m.sigma);
    let (next, nis) = vector_update(s, &h, &innovation, &r)?;
    Ok((next, InnovationRecord::new(s.epoch, nis, 2)))
}

/// Direct 3-D position observation with isotropic sigma (m).
pub fn ekf_update_position(s: &NavState, pos: &EcefCoord, sigma: f64) -> Result<(NavState, InnovationRecord)> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("position sigma", "must be positive"));
    }
    let mut h = DMatrix::zeros(3, s.dim());
    for axis in 0..3 {
        h[(axis, POS + axis)] = 1.0;
    }
    let innovation = DVector::from_iterator(3, (*pos - s.pos()).iter().copied());
    let r = DMatrix::from_diagonal_element(3, 3, sigma * sigma);
    let (next, nis) = vector_update(s, &h, &innovation, &r)?;
    Ok((next, InnovationRecord::new(s.epoch, nis, 3)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::state::{InitConfig, MotionModel};
    use crate::geodesy::{ecef_to_geodetic, enu_to_ecef, geodetic_to_ecef, EnuCoord};

    fn sat(id: u16, pos: EcefCoord) -> SatelliteState {
        SatelliteState {
            sat_id: SatId(id),
            pos,
            vel: Vector3::zeros(),
            clock_bias: 0.0,
        }
    }

    fn start() -> (GeodeticCoord, NavState) {
        let o = GeodeticCoord::from_degrees(15.4, 73.8, 10.0).unwrap();
        let s = NavState::from_fix(
            MotionModel::ConstantVelocity,
            geodetic_to_ecef(&o),
            12.0,
            0.0,
            &InitConfig::default(),
        );
        (o, s)
    }

    fn sats_around(o: &GeodeticCoord) -> Vec<SatelliteState> {
        [(0.0, 0.0), (1.0, 1.0), (-1.0, 0.5), (0.3, -1.0), (-0.6, -0.7)]
            .iter()
            .enumerate()
            .map(|(i, &(e, n))| sat(i as u16 + 1, enu_to_ecef(&EnuCoord::new(e * 1.5e7, n * 1.5e7, 2.0e7), o)))
            .collect()
    }

    fn predicted(s: &NavState, sv: &SatelliteState) -> f64 {
        s.pos().distance(&sv.pos) + s.clock_bias()
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_covariance() {
        let (o, s) = start();
        let sv = sats_around(&o)[1];
        let m = PseudorangeMeas {
            sat_id: sv.sat_id,
            rho: predicted(&s, &sv),
            sigma: 2.0,
            epoch: 0.0,
        };
        let (next, rec) = ekf_update_pseudorange(&s, &m, &sv).unwrap();
        assert!((&next.x - &s.x).amax() < 1e-6);
        assert!(next.covariance.trace() <= s.covariance.trace());
        assert!(rec.nis.abs() < 1e-12);
        assert_eq!(rec.dof, 1);
    }

    #[test]
    fn precise_range_shrinks_line_of_sight_variance() {
        let (o, s) = start();
        let sv = sats_around(&o)[2];
        let m = PseudorangeMeas {
            sat_id: sv.sat_id,
            rho: predicted(&s, &sv) + 3.0,
            sigma: 0.01,
            epoch: 0.0,
        };
        let (next, _) = ekf_update_pseudorange(&s, &m, &sv).unwrap();
        let u = (s.pos() - sv.pos).normalize();
        let proj = |p: &DMatrix<f64>| {
            let block = p.view((0, 0), (3, 3)).into_owned();
            (u.transpose() * block * u)[(0, 0)]
        };
        // scalar Kalman algebra on the range direction: var+ = var- * r / (var- + clock var + r)
        let prior = proj(&s.covariance);
        let expected = prior - prior * prior / (prior + s.covariance[(6, 6)] + 1e-4);
        assert!(proj(&next.covariance) < prior);
        assert!((proj(&next.covariance) - expected).abs() < 1e-6 * prior);
    }

    #[test]
    fn coincident_satellite_is_degenerate() {
        let (_, s) = start();
        let sv = sat(1, s.pos());
        let m = PseudorangeMeas {
            sat_id: sv.sat_id,
            rho: 1.0,
            sigma: 1.0,
            epoch: 0.0,
        };
        assert!(matches!(ekf_update_pseudorange(&s, &m, &sv), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn epoch_update_is_order_invariant() {
        let (o, s) = start();
        let sats = sats_around(&o);
        let offsets = [4.0, -2.0, 7.5, 1.0, -3.3];
        let meas: Vec<_> = sats
            .iter()
            .zip(offsets)
            .map(|(sv, d)| PseudorangeMeas {
                sat_id: sv.sat_id,
                rho: predicted(&s, sv) + d,
                sigma: 1.5,
                epoch: 0.0,
            })
            .collect();
        let (a, ia) = ekf_update_epoch(&s, &meas, &sats).unwrap();
        let order = [3, 0, 4, 2, 1];
        let m2: Vec<_> = order.iter().map(|&i| meas[i]).collect();
        let s2: Vec<_> = order.iter().map(|&i| sats[i]).collect();
        let (b, ib) = ekf_update_epoch(&s, &m2, &s2).unwrap();
        let dx = (&a.x - &b.x).amax();
        assert!(dx <= 1e-6 * a.x.amax());
        assert!((&a.covariance - &b.covariance).amax() <= 1e-6 * a.covariance.amax());
        // sequential NIS sums to the batch NIS regardless of order
        let na: f64 = ia.iter().map(|r| r.record(0.0).nis).sum();
        let nb: f64 = ib.iter().map(|r| r.record(0.0).nis).sum();
        assert!((na - nb).abs() < 1e-9 * na.max(1.0));
    }

    #[test]
    fn flow_update_properties() {
        let (o, mut s) = start();
        let rot = enu_rotation(&o);
        let v_enu = Vector3::new(3.0, -4.0, 0.5);
        s.x.fixed_rows_mut::<3>(VEL).copy_from(&(rot.transpose() * v_enu));
        let exact = FlowVelocityMeas {
            v_east: 3.0,
            v_north: -4.0,
            sigma: 0.2,
            epoch: 0.0,
        };
        let (next, rec) = ekf_update_flow(&s, &exact, &o).unwrap();
        assert!((&next.x - &s.x).amax() < 1e-9);
        assert!(rec.nis < 1e-12 && rec.dof == 2);
        let diff = &s.covariance - &next.covariance;
        assert!(diff.symmetric_eigen().eigenvalues.min() >= -1e-9);

        let vague = FlowVelocityMeas {
            v_east: 50.0,
            v_north: 50.0,
            sigma: 1e9,
            epoch: 0.0,
        };
        let (next, _) = ekf_update_flow(&s, &vague, &o).unwrap();
        assert!((&next.x - &s.x).norm() < 1e-6);
    }

    #[test]
    fn position_update_pulls_toward_measurement() {
        let (o, s) = start();
        let target = enu_to_ecef(&EnuCoord::new(5.0, 0.0, 0.0), &o);
        let (next, rec) = ekf_update_position(&s, &target, 1.0).unwrap();
        let moved = crate::geodesy::ecef_to_enu(&next.pos(), &o);
        assert!(moved.east > 4.9 && moved.east < 5.0);
        assert!(rec.nis > 0.0 && rec.dof == 3);
        let _ = ecef_to_geodetic(&next.pos()).unwrap();
    }

    #[test]
    fn combine_sums() {
        let r = InnovationRecord::combine(
            3.0,
            [InnovationRecord::new(3.0, 1.5, 1), InnovationRecord::new(3.0, 2.0, 2)],
        );
        assert_eq!((r.nis, r.dof, r.epoch), (3.5, 3, 3.0));
    }
}
