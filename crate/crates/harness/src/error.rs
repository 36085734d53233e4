use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The configuration could not be parsed or failed validation.
    #[error("{path}: invalid configuration at `{field}`: {message}")]
    Config { path: String, field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] saddle_core::Error),

    /// Every grid point diverged.
    #[error("no convergent schedule for solver {solver}: all {points} grid points diverged")]
    NoConvergentSchedule { solver: String, points: usize },

    #[error("{0}")]
    Unsupported(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Whether the error stems from user input rather than a computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::Config { .. }
                | HarnessError::Unsupported(_)
                | HarnessError::Core(saddle_core::Error::RankDeficient { .. })
                | HarnessError::Core(saddle_core::Error::InvalidParameter(_))
                | HarnessError::Core(saddle_core::Error::NotPositiveDefinite(_))
                | HarnessError::Core(saddle_core::Error::DimensionMismatch { .. })
                | HarnessError::Core(saddle_core::Error::Document(_))
        )
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
