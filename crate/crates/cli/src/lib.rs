//! Config-driven runner for the Everett measurement models.

pub mod cli;
pub mod config;
pub mod fixtures;
pub mod report;
pub mod scenarios;
