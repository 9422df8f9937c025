use thiserror::Error;

use crate::extractor::ExtractorError;
use crate::imaging::ImagingError;
use crate::qgan::QganError;
use crate::sim::SimError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error used by the experiment commands.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Qgan(#[from] QganError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Extractor(#[from] ExtractorError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for everything that
    /// goes wrong while reading or processing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Sim(SimError::InvalidProfile(_)) | Error::Sim(SimError::ProfileFormat { .. }) => 2,
            Error::Qgan(QganError::InvalidConfig(_)) => 2,
            Error::Extractor(ExtractorError::InvalidConfig(_)) => 2,
            _ => 3,
        }
    }
}
