use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A model or scenario file failed to parse or validate.
    #[error("CONFIG_INVALID: {origin}: {message}")]
    ConfigInvalid { origin: String, message: String },

    #[error(transparent)]
    Numeric(#[from] refracted_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("a report needs at least one record")]
    EmptyReport,

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn config(origin: impl Into<String>, message: impl Into<String>) -> Self {
        Self::ConfigInvalid {
            origin: origin.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 1 is reserved for failed checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::ConfigInvalid { .. } | Self::Usage(_) => 2,
            Self::Numeric(_) => 3,
            Self::Io { .. } | Self::EmptyReport => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
