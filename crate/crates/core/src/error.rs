use thiserror::Error;

/// Errors raised by the estimation and simulation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),

    #[error("pixel ({0}, {1}) is out of bounds")]
    OutOfBounds(usize, usize),

    #[error("aperture ambiguity: smaller structure-tensor eigenvalue {min_eigenvalue:e} below {threshold:e}")]
    ApertureAmbiguity { min_eigenvalue: f64, threshold: f64 },

    #[error("elevation must be positive, got {0} deg")]
    NonPositiveElevation(f64),

    #[error("at least 4 satellites required, got {0}")]
    InsufficientSatellites(usize),

    #[error("singular geometry (condition number {0:e})")]
    SingularGeometry(f64),

    #[error("time {t} outside [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },

    #[error("baseline horizontal RMSE is zero")]
    DivisionByZero,

    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("start position ({lat:.5}, {lon:.5}) lies outside the service area")]
    OutsideServiceArea { lat: f64, lon: f64 },

    #[error("epoch {epoch} s: {source}")]
    AtEpoch {
        epoch: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub fn at_epoch(self, epoch: f64) -> Self {
        Error::AtEpoch {
            epoch,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
