//! Scenario ingestion, experiment orchestration, and report emission for the
//! branchsim library.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;

pub use error::CliError;
pub use scenario::{Scenario, ScenarioFile};
