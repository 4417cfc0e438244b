//! Command-line front end: scenario documents, GPX tracks, CSV records and
//! SVG figures, plus the `ofgnss` subcommands built on them.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod gpx;
pub mod plot;
pub mod records;
pub mod track;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_scenario_config, scenario_to_json, ConfigError, ScenarioConfig};
pub use gpx::{export_gpx, import_gpx, GpxError};
pub use plot::{emit_plot, PlotError, PlotKind};
pub use records::RecordRow;
pub use track::{smooth_track, SmoothedTrack, Track, TrackError, TrackPoint, TrackSource};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub(crate) fn io(path: &Path, reason: impl ToString) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn runtime(reason: impl ToString) -> Self {
        CliError::Runtime(reason.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
