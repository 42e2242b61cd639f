//! Scenario ingestion, batch execution, certificate reports and figure-data
//! emission for the hybrid-trajectory toolkit. The binary `hytraj` wraps the
//! commands in this crate.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;
