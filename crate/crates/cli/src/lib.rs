//! File formats, random instance families and the subcommands of the
//! `qcqp-exact` tool.

pub mod commands;
pub mod error;
pub mod generate;
pub mod instance_file;
pub mod report;

pub use error::CliError;
