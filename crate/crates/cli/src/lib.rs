//! Command-line front end of the `uav-tpc` solvers: scenario files, random
//! scenario generation, benchmarks, reports and plots.

pub mod bench;
pub mod error;
pub mod generate;
pub mod plots;
pub mod report;
pub mod scenario_file;

pub use bench::{run_benchmark, scheme_run, BenchConfig};
pub use error::{CliError, CliResult};
pub use generate::{generate_scenario, generate_scenario_file, GenerateConfig};
pub use plots::{emit_plots, emit_run_plots};
pub use report::{Cell, CellResult, RunReport, SchemeRun, SchemeSummary};
pub use scenario_file::{Level, ScenarioFile, Unit};
