use std::path::PathBuf;

use thiserror::Error;

use crate::maskfile::MaskFileError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VERDICT_FALSE: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const IO: u8 = 3;
    pub const NUMERIC: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    MaskFile {
        path: PathBuf,
        source: MaskFileError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] ylg_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Invalid(_) | Self::MaskFile { .. } => exit::INVALID,
            Self::Io { .. } | Self::Output(_) => exit::IO,
            Self::Core(ylg_core::Error::InvalidArgument(_)) => exit::INVALID,
            Self::Core(_) => exit::NUMERIC,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
