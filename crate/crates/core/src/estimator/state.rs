use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::EcefCoord;

/// Kinematic process model.
///
/// Constant velocity carries `[pos, vel, clock_bias, clock_drift]` (8 states)
/// driven by white acceleration. Constant acceleration adds an acceleration
/// block (11 states) driven by white jerk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionModel {
    #[default]
    ConstantVelocity,
    ConstantAcceleration,
}

impl MotionModel {
    pub fn dim(self) -> usize {
        match self {
            MotionModel::ConstantVelocity => 8,
            MotionModel::ConstantAcceleration => 11,
        }
    }

    pub(crate) fn clock_index(self) -> usize {
        self.dim() - 2
    }
}

pub(crate) const POS: usize = 0;
pub(crate) const VEL: usize = 3;
pub(crate) const ACC: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    #[serde(default)]
    pub model: MotionModel,
    /// White-noise PSD of the highest kinematic derivative: acceleration
    /// ((m/s²)²/Hz) for constant velocity, jerk ((m/s³)²/Hz) for constant
    /// acceleration.
    pub accel_psd: f64,
    /// Clock phase random-walk PSD (m²/s).
    pub clock_bias_psd: f64,
    /// Clock frequency random-walk PSD (m²/s³).
    pub clock_drift_psd: f64,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        Self {
            model: MotionModel::ConstantVelocity,
            accel_psd: 0.5,
            clock_bias_psd: 0.1,
            clock_drift_psd: 0.01,
        }
    }
}

impl ProcessConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("accel_psd", self.accel_psd),
            ("clock_bias_psd", self.clock_bias_psd),
            ("clock_drift_psd", self.clock_drift_psd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("process", format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// State transition over `dt`.
    pub fn transition(&self, dt: f64) -> DMatrix<f64> {
        let n = self.model.dim();
        let mut f = DMatrix::identity(n, n);
        for axis in 0..3 {
            f[(POS + axis, VEL + axis)] = dt;
            if self.model == MotionModel::ConstantAcceleration {
                f[(POS + axis, ACC + axis)] = 0.5 * dt * dt;
                f[(VEL + axis, ACC + axis)] = dt;
            }
        }
        let c = self.model.clock_index();
        f[(c, c + 1)] = dt;
        f
    }

    /// Discretized process noise over `dt`.
    pub fn process_noise(&self, dt: f64) -> DMatrix<f64> {
        let n = self.model.dim();
        let mut q = DMatrix::zeros(n, n);
        let q_kin = self.accel_psd;
        let (dt2, dt3) = (dt * dt, dt * dt * dt);
        for axis in 0..3 {
            let (p, v) = (POS + axis, VEL + axis);
            match self.model {
                MotionModel::ConstantVelocity => {
                    q[(p, p)] = q_kin * dt3 / 3.0;
                    q[(p, v)] = q_kin * dt2 / 2.0;
                    q[(v, p)] = q_kin * dt2 / 2.0;
                    q[(v, v)] = q_kin * dt;
                }
                MotionModel::ConstantAcceleration => {
                    let a = ACC + axis;
                    let (dt4, dt5) = (dt3 * dt, dt3 * dt2);
                    q[(p, p)] = q_kin * dt5 / 20.0;
                    q[(p, v)] = q_kin * dt4 / 8.0;
                    q[(p, a)] = q_kin * dt3 / 6.0;
                    q[(v, v)] = q_kin * dt3 / 3.0;
                    q[(v, a)] = q_kin * dt2 / 2.0;
                    q[(a, a)] = q_kin * dt;
                    q[(v, p)] = q[(p, v)];
                    q[(a, p)] = q[(p, a)];
                    q[(a, v)] = q[(v, a)];
                }
            }
        }
        let c = self.model.clock_index();
        let (sb, sd) = (self.clock_bias_psd, self.clock_drift_psd);
        q[(c, c)] = sb * dt + sd * dt3 / 3.0;
        q[(c, c + 1)] = sd * dt2 / 2.0;
        q[(c + 1, c)] = sd * dt2 / 2.0;
        q[(c + 1, c + 1)] = sd * dt;
        q
    }
}

/// Initial one-sigma-squared uncertainties used when the filter starts from a fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// m² per axis.
    pub pos_var: f64,
    /// (m/s)² per axis.
    pub vel_var: f64,
    /// (m/s²)² per axis, constant-acceleration model only.
    #[serde(default = "default_acc_var")]
    pub acc_var: f64,
    pub clock_bias_var: f64,
    pub clock_drift_var: f64,
}

fn default_acc_var() -> f64 {
    1.0
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            pos_var: 100.0,
            vel_var: 10.0,
            acc_var: default_acc_var(),
            clock_bias_var: 100.0,
            clock_drift_var: 1.0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.pos_var, self.vel_var, self.acc_var, self.clock_bias_var, self.clock_drift_var];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("init", "variances must be positive"));
        }
        Ok(())
    }
}

/// Filter state: ECEF position/velocity (plus acceleration for the CA
/// model), receiver clock bias and drift in range units, and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    pub(crate) model: MotionModel,
    pub(crate) x: DVector<f64>,
    pub(crate) covariance: DMatrix<f64>,
    pub epoch: f64,
}

impl NavState {
    pub fn new(model: MotionModel, x: DVector<f64>, covariance: DMatrix<f64>, epoch: f64) -> Result<Self> {
        let n = model.dim();
        if x.len() != n || covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::invalid("nav state", format!("expected dimension {n}")));
        }
        Ok(Self {
            model,
            x,
            covariance,
            epoch,
        })
    }

    /// Starts the filter at a position fix with zero velocity.
    pub fn from_fix(model: MotionModel, pos: EcefCoord, clock_bias: f64, epoch: f64, init: &InitConfig) -> Self {
        let n = model.dim();
        let mut x = DVector::zeros(n);
        x.fixed_rows_mut::<3>(POS).copy_from(&pos.to_vector());
        let c = model.clock_index();
        x[c] = clock_bias;
        let mut diag = DVector::zeros(n);
        for axis in 0..3 {
            diag[POS + axis] = init.pos_var;
            diag[VEL + axis] = init.vel_var;
            if model == MotionModel::ConstantAcceleration {
                diag[ACC + axis] = init.acc_var;
            }
        }
        diag[c] = init.clock_bias_var;
        diag[c + 1] = init.clock_drift_var;
        Self {
            model,
            x,
            covariance: DMatrix::from_diagonal(&diag),
            epoch,
        }
    }

    /// Replaces the ECEF velocity estimate, leaving the covariance alone.
    pub fn with_velocity(mut self, vel: Vector3<f64>) -> Self {
        self.x.fixed_rows_mut::<3>(VEL).copy_from(&vel);
        self
    }

    pub fn model(&self) -> MotionModel {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn pos(&self) -> EcefCoord {
        EcefCoord::from_vector(&self.x.fixed_rows::<3>(POS).into_owned())
    }

    pub fn vel(&self) -> Vector3<f64> {
        self.x.fixed_rows::<3>(VEL).into_owned()
    }

    pub fn acc(&self) -> Option<Vector3<f64>> {
        (self.model == MotionModel::ConstantAcceleration).then(|| self.x.fixed_rows::<3>(ACC).into_owned())
    }

    pub fn clock_bias(&self) -> f64 {
        self.x[self.model.clock_index()]
    }

    pub fn clock_drift(&self) -> f64 {
        self.x[self.model.clock_index() + 1]
    }

    /// Symmetry within 1e-9 relative and strictly positive eigenvalues.
    pub fn check_covariance(&self) -> Result<()> {
        let p = &self.covariance;
        let scale = p.amax().max(f64::MIN_POSITIVE);
        let asym = (p - p.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(Error::invalid("covariance", format!("asymmetry {asym:e}")));
        }
        let min_eig = p.clone().symmetric_eigen().eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::invalid("covariance", format!("eigenvalue {min_eig:e} not positive")));
        }
        Ok(())
    }
}

pub(crate) fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

/// Propagates mean and covariance over `dt >= 0`.
pub fn ekf_predict(s: &NavState, dt: f64, cfg: &ProcessConfig) -> Result<NavState> {
    if !(dt >= 0.0) {
        return Err(Error::NonPositiveDt(dt));
    }
    if cfg.model != s.model {
        return Err(Error::invalid("process model", "does not match the state layout"));
    }
    if dt == 0.0 {
        return Ok(s.clone());
    }
    let f = cfg.transition(dt);
    let x = &f * &s.x;
    let mut p = &f * &s.covariance * f.transpose() + cfg.process_noise(dt);
    symmetrize(&mut p);
    Ok(NavState {
        model: s.model,
        x,
        covariance: p,
        epoch: s.epoch + dt,
    })
}
