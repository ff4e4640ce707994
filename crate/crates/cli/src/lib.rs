//! Experiment driver: configuration, stages, reports and plot data.

pub mod config;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod cli;
