//! Command-line front end: layered configs, simulation runs, parameter
//! sweeps and inspection dumps.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{Axis, ConfigLayers, Resolved};
pub use error::{CliError, CliResult};
pub use report::Report;
