//! Navigation estimation: least-squares fixes, the flow-aided EKF and the
//! innovation-based spoofing detector.

mod detect;
mod lsq;
mod state;
mod update;

pub use detect::{chi_square_quantile, spoof_detect, Detection, DetectorConfig, SpoofDetector};
pub use lsq::{gdop, ls_position_fix, GeometryReport, PositionFix};
pub use state::{ekf_predict, InitConfig, MotionModel, NavState, ProcessConfig};
pub use update::{
    ekf_update_epoch, ekf_update_epoch_gated, ekf_update_flow, ekf_update_position, ekf_update_pseudorange, InnovationRecord,
    RangeInnovation,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Filter tuning shared by scenario runs and track smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub process: ProcessConfig,
    pub init: InitConfig,
    pub detector: DetectorConfig,
    /// Per-pseudorange rejection probability of the innovation gate; no
    /// gating when absent.
    pub range_gate_alpha: Option<f64>,
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        self.init.validate()?;
        self.detector.validate()?;
        if let Some(a) = self.range_gate_alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(crate::error::Error::invalid("range_gate_alpha", format!("{a} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Single-measurement NIS above which a pseudorange is rejected.
    pub fn range_gate(&self) -> Option<f64> {
        self.range_gate_alpha.map(|a| chi_square_quantile(1.0 - a, 1))
    }
}
