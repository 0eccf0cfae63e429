//! Experiment harness: configs, presets, run execution, metrics files and charts.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod presets;
