//! File formats and the runtime bench.
//!
//! * Scenario configs are TOML with unknown keys rejected.
//! * Step logs are JSON lines, one schema-versioned record per step.
//! * Summaries and field grids are CSV; grid metadata sits in `#` lines.

pub mod bench;
pub mod config;
pub mod grid;
pub mod logfile;

pub use bench::{run_bench, BenchReport, RuntimeStats};
pub use config::{load_scenario, parse_scenario, resolve_seed, scenario_to_toml, SEED_ENV};
pub use grid::{parse_bbox, parse_obstacles, write_field_grid};
pub use logfile::{read_step_log, write_outputs, write_step_log, write_summary_csv, JsonlWriter, OutputPaths};
