//! Library behind the `nvpd` command: configuration, simulation and fit
//! commands, and the figure reproduction pipelines.

pub mod config;
pub mod error;
pub mod fit;
pub mod manifest;
pub mod presets;
pub mod reproduce;
pub mod simulate;
pub mod synthetic;
pub mod table;

pub use error::{CliError, Result};
