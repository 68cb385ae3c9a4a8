//! Orchestration for the `ncgauge` command: single runs, grid sweeps,
//! re-analysis and resumption.

pub mod analyze;
pub mod config;
pub mod report;
pub mod run;
pub mod sweep;
