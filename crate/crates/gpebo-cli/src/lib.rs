//! Scenario ingestion, trace persistence, SVG transients and the command
//! surface for the `gpebo` adaptive observer.

pub mod commands;
pub mod config;
pub mod csv;
pub mod plot;

pub use commands::{pe, simulate, verify, CliError, SimulateOpts};
pub use config::{ConfigError, OutputKind, ScenarioConfig, Violation};
