//! Command implementations behind the `igpo` binary.

pub mod commands;
pub mod error;
pub mod report;
pub mod settings;

pub use error::CliError;
pub use settings::Settings;
