//! File formats, parallel sampling and the command layer of the `twinbeam`
//! tool. The numerics live in [`twinbeam_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;

pub use error::{CliError, CliResult};
