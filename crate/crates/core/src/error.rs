use thiserror::Error;

/// Errors produced by the mask, graph, attention and inversion routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("row {row} of a {rows}x{cols} mask has no attended position")]
    FullyMaskedRow {
        row: usize,
        rows: usize,
        cols: usize,
    },
    #[error("inversion diverged at step {step}: loss is not finite")]
    Diverged { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
