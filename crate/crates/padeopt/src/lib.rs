//! File formats, table regeneration and the command-line front end for
//! `padeopt-core`.

pub mod checks;
pub mod commands;
pub mod error;
pub mod formats;
pub mod tables;

pub use error::CliError;
