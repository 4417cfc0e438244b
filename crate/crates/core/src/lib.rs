//! Optical-flow aided GNSS navigation toolkit.
//!
//! Ground-facing camera flow is turned into metric velocity and fused with
//! pseudoranges from a regional (NavIC-style) constellation in an extended
//! Kalman filter, with innovation-based spoofing detection. The
//! [`scenario`] module ties everything into deterministic simulations that
//! compare flow-aided and GNSS-only estimation.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constellation;
pub mod error;
pub mod estimator;
pub mod geodesy;
pub mod measurements;
pub mod optical_flow;
pub mod scenario;
pub mod texture;

pub use constellation::{OrbitalElements, SatId, SatelliteState, ServiceArea};
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, GeometryReport, InnovationRecord, NavState, ProcessConfig};
pub use geodesy::{EcefCoord, EnuCoord, GeodeticCoord, LookAngles};
pub use measurements::{ErrorBudget, FlowVelocityMeas, PseudorangeMeas, SpoofProfile};
pub use optical_flow::{CameraModel, FlowField, FlowVector, GradientField, ImageFrame};
pub use scenario::{EpochRecord, RunMetrics, RunMode, Scenario, TrajectorySpec};
