//! Experiment drivers, persistence and outputs.

pub mod config;
