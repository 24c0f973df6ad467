use nlbiplot::{DataError, FitError, GeometryError, InversionError};
use thiserror::Error;

/// Process exit status for each failure class.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const PARSE: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const GEOMETRY: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Data(#[from] DataError),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{0}")]
    Fit(#[from] FitError),
    #[error("EM did not converge: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Inversion(#[from] InversionError),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Csv(_) | Self::Data(_) | Self::Json(_) | Self::Invalid(_) => exit::PARSE,
            Self::Fit(FitError::InvalidConfig(_) | FitError::DimensionMismatch(_)) => exit::PARSE,
            Self::Fit(_) | Self::NotConverged(_) => exit::NON_CONVERGENCE,
            Self::Geometry(_) | Self::Inversion(_) => exit::GEOMETRY,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
