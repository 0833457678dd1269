//! Benchmark harness for the karc planner: trial runner, metrics table, trajectory
//! files and SVG plots.

pub mod bench;
pub mod metrics;
pub mod overrides;
pub mod plot;
pub mod trajectory_csv;
