//! Command-line front end for `ylg_core`: mask files, structural reports,
//! visualisation export and small numeric demos.
//!
//! Exit codes: 0 success, 1 a checked factorization lacks full information,
//! 2 invalid arguments or malformed input, 3 I/O failure, 4 numeric failure
//! (a fully masked attention row or a diverging inversion).

pub mod commands;
pub mod error;
pub mod maskfile;
pub mod report;
pub mod toy;
pub mod viz;

pub use error::{exit, CliError, CliResult};
pub use maskfile::{MaskFile, MaskFileError};
pub use report::StatsReport;
