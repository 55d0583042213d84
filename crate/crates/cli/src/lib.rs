//! File-driven front end for the position-building solver: scenario configs
//! in, strategy curves, state-space traces and reports out.

pub mod config;
pub mod error;
pub mod format;
pub mod scenario;
pub mod sweep;

pub use config::ScenarioConfig;
pub use error::CliError;
pub use scenario::{run_scenario, Outcome};
pub use sweep::run_sweep;
