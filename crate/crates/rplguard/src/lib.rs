//! Scenario files, CSV reports and parallel batch runs for `rplguard-core`.

pub mod config;
pub mod output;
pub mod plan;
