//! JSON scenario documents.

use ofgnss_core::constellation::{OrbitalElements, ServiceArea};
use ofgnss_core::measurements::{ErrorBudget, SpoofProfile};
use ofgnss_core::optical_flow::CameraModel;
use ofgnss_core::scenario::{MultipathBurst, DEFAULT_ELEVATION_MASK_DEG, DEFAULT_TEXTURE_CELL};
use ofgnss_core::{EstimatorConfig, Scenario, TrajectorySpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    /// Malformed document, unknown or missing key, or wrong type.
    #[error("schema error: {0}")]
    Schema(String),
    /// Well-formed document whose values break a constraint.
    #[error("value error: {0}")]
    Value(String),
}

fn default_flow_sigma() -> f64 {
    0.2
}

fn default_texture_cell() -> f64 {
    DEFAULT_TEXTURE_CELL
}

fn default_mask() -> f64 {
    DEFAULT_ELEVATION_MASK_DEG
}

fn yes() -> bool {
    true
}

/// On-disk form of [`Scenario`], field for field, plus the schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    pub trajectory: TrajectorySpec,
    pub gnss_rate: f64,
    pub flow_rate: f64,
    #[serde(default = "default_flow_sigma")]
    pub flow_sigma: f64,
    pub error_budget: ErrorBudget,
    #[serde(default)]
    pub multipath_bursts: Vec<MultipathBurst>,
    #[serde(default)]
    pub spoof: Option<SpoofProfile>,
    #[serde(default)]
    pub camera: Option<CameraModel>,
    #[serde(default)]
    pub texture_seed: u64,
    #[serde(default = "default_texture_cell")]
    pub texture_cell: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub constellation: Option<Vec<OrbitalElements>>,
    #[serde(default = "default_mask")]
    pub elevation_mask_deg: f64,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default = "yes")]
    pub enforce_service_area: bool,
    #[serde(default)]
    pub service_area: ServiceArea,
}

impl From<&Scenario> for ScenarioConfig {
    fn from(s: &Scenario) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            name: s.name.clone(),
            trajectory: s.trajectory.clone(),
            gnss_rate: s.gnss_rate,
            flow_rate: s.flow_rate,
            flow_sigma: s.flow_sigma,
            error_budget: s.error_budget,
            multipath_bursts: s.multipath_bursts.clone(),
            spoof: s.spoof.clone(),
            camera: s.camera,
            texture_seed: s.texture_seed,
            texture_cell: s.texture_cell,
            rng_seed: s.rng_seed,
            constellation: s.constellation.clone(),
            elevation_mask_deg: s.elevation_mask_deg,
            estimator: s.estimator,
            enforce_service_area: s.enforce_service_area,
            service_area: s.service_area,
        }
    }
}

impl From<ScenarioConfig> for Scenario {
    fn from(c: ScenarioConfig) -> Self {
        Scenario {
            name: c.name,
            trajectory: c.trajectory,
            gnss_rate: c.gnss_rate,
            flow_rate: c.flow_rate,
            flow_sigma: c.flow_sigma,
            error_budget: c.error_budget,
            multipath_bursts: c.multipath_bursts,
            spoof: c.spoof,
            camera: c.camera,
            texture_seed: c.texture_seed,
            texture_cell: c.texture_cell,
            rng_seed: c.rng_seed,
            constellation: c.constellation,
            elevation_mask_deg: c.elevation_mask_deg,
            estimator: c.estimator,
            enforce_service_area: c.enforce_service_area,
            service_area: c.service_area,
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario_config(document: &str) -> Result<Scenario, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(document).map_err(|e| ConfigError::Schema(e.to_string()))?;
    if cfg.schema != SCHEMA_VERSION {
        return Err(ConfigError::Schema(format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            cfg.schema
        )));
    }
    let scenario = Scenario::from(cfg);
    scenario.validate().map_err(|e| ConfigError::Value(e.to_string()))?;
    Ok(scenario)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(&ScenarioConfig::from(s)).expect("scenario serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofgnss_core::scenario::{canonical_degraded_scenario, canonical_figure_xi_scenario, canonical_spoof_scenario};

    #[test]
    fn canonical_scenarios_round_trip() {
        for s in [
            canonical_degraded_scenario(),
            canonical_spoof_scenario(),
            canonical_figure_xi_scenario(),
        ] {
            assert_eq!(parse_scenario_config(&scenario_to_json(&s)).unwrap(), s);
        }
    }

    #[test]
    fn missing_trajectory_is_a_schema_error() {
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&canonical_degraded_scenario())).unwrap();
        v.as_object_mut().unwrap().remove("trajectory");
        match parse_scenario_config(&v.to_string()) {
            Err(ConfigError::Schema(msg)) => assert!(msg.contains("trajectory"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_a_schema_error() {
        let doc = scenario_to_json(&canonical_degraded_scenario()).replacen("\"gnss_rate\"", "\"gnss_rte\"", 1);
        match parse_scenario_config(&doc) {
            Err(ConfigError::Schema(msg)) => assert!(msg.contains("gnss_rte") && msg.contains("line"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_rate_is_a_value_error() {
        let mut s = canonical_degraded_scenario();
        s.gnss_rate = 0.0;
        match parse_scenario_config(&scenario_to_json(&s)) {
            Err(ConfigError::Value(msg)) => assert!(msg.contains("gnss_rate") && msg.contains("> 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_schema_version() {
        let doc = scenario_to_json(&canonical_degraded_scenario()).replacen("\"schema\": 1", "\"schema\": 2", 1);
        assert!(matches!(parse_scenario_config(&doc), Err(ConfigError::Schema(_))));
    }
}
